#pragma once

// Replicated network database. Node records bind an address to a routing key;
// lease records bind a pseudonym to an end-to-end key and an inbound gateway.
// Nothing in either record kind references the other.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsim/bytes.hpp"
#include "mixsim/crypto/cipher.hpp"
#include "mixsim/crypto/onion.hpp"
#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::netdb {

struct NodeRecord {
  NodeAddress address;
  crypto::PublicKey routing_public_key;
};

struct LeaseRecord {
  std::string pseudonym;
  crypto::PublicKey end_to_end_public_key;
  NodeAddress inbound_gateway_address;
  std::uint32_t tunnel_id = 0;
  double expiry = 0.0;
};

enum class DeliveryChannel { OutboundTunnel, Direct };

inline constexpr std::size_t kPseudonymHexChars = 32;

/// Pseudonym derived from an end-to-end public key (first 32 hex chars of a
/// keyed digest).
inline std::string derive_pseudonym(const crypto::PublicKey& end_to_end_key) {
  const auto d = crypto::hmac_sha256(as_bytes("mixsim.b32"), end_to_end_key.bytes);
  return to_hex(d).substr(0, kPseudonymHexChars);
}

class NetDb {
 public:
  explicit NetDb(bool strict = true) : strict_(strict) {}

  void register_node(NodeAddress address, crypto::PublicKey routing_public_key) {
    if (routing_public_key.purpose != crypto::KeyPurpose::Routing) {
      fail(Errc::KeyPurposeMismatch, "node records hold routing keys only");
    }
    if (nodes_.contains(address)) fail(Errc::DuplicateAddress, address.to_string());
    nodes_.emplace(address, NodeRecord{address, std::move(routing_public_key)});
  }

  const NodeRecord* lookup_node(NodeAddress address) const {
    auto it = nodes_.find(address);
    return it == nodes_.end() ? nullptr : &it->second;
  }

  void publish_lease(LeaseRecord lease, DeliveryChannel via, double now) {
    if (strict_ && via != DeliveryChannel::OutboundTunnel) {
      fail(Errc::DirectWriteRejected, "leases must be published through an outbound tunnel");
    }
    if (lease.end_to_end_public_key.purpose != crypto::KeyPurpose::EndToEnd) {
      fail(Errc::KeyPurposeMismatch, "lease records hold end-to-end keys only");
    }
    if (lease.expiry <= now) fail(Errc::ExpiredLease, lease.pseudonym);
    if (lease.pseudonym != derive_pseudonym(lease.end_to_end_public_key)) {
      fail(Errc::InvalidConfig, "pseudonym does not match its end-to-end key");
    }
    leases_[lease.pseudonym] = std::move(lease);
  }

  /// Lease for `pseudonym` if it exists and has not expired at `now`.
  std::optional<LeaseRecord> lookup_lease(const std::string& pseudonym, double now) const {
    auto it = leases_.find(pseudonym);
    if (it == leases_.end() || it->second.expiry <= now) return std::nullopt;
    return it->second;
  }

  /// `length` distinct nodes not in `exclude`, uniform without replacement.
  std::vector<crypto::RouteHop> sample_route(std::size_t length, const std::set<NodeAddress>& exclude,
                                             Rng& rng) const {
    if (length == 0) fail(Errc::EmptyRoute, "route length must be at least 1");
    std::vector<const NodeRecord*> pool;
    for (const auto& [addr, rec] : nodes_) {
      if (!exclude.contains(addr)) pool.push_back(&rec);
    }
    if (pool.size() < length) {
      fail(Errc::InsufficientNodes, "need " + std::to_string(length) + " nodes, " + std::to_string(pool.size()) +
                                        " eligible");
    }
    // Partial Fisher-Yates.
    std::vector<crypto::RouteHop> route;
    route.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      route.push_back({pool[i]->routing_public_key, pool[i]->address});
    }
    return route;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t lease_count() const { return leases_.size(); }
  const std::map<NodeAddress, NodeRecord>& nodes() const { return nodes_; }
  const std::map<std::string, LeaseRecord>& leases() const { return leases_; }
  bool strict() const { return strict_; }

 private:
  bool strict_;
  std::map<NodeAddress, NodeRecord> nodes_;
  std::map<std::string, LeaseRecord> leases_;
};

inline nlohmann::json to_json(const NetDb& db) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [addr, rec] : db.nodes()) {
    nodes.push_back({{"address", addr.to_string()}, {"routing_public_key", to_hex(rec.routing_public_key.bytes)}});
  }
  nlohmann::json leases = nlohmann::json::array();
  for (const auto& [name, lease] : db.leases()) {
    leases.push_back({{"pseudonym", lease.pseudonym},
                      {"end_to_end_public_key", to_hex(lease.end_to_end_public_key.bytes)},
                      {"inbound_gateway_address", lease.inbound_gateway_address.to_string()},
                      {"tunnel_id", lease.tunnel_id},
                      {"expiry", lease.expiry}});
  }
  return {{"nodes", std::move(nodes)}, {"leases", std::move(leases)}};
}

/// Unlinkability audit over the serialized database: no lease field other
/// than the gateway address embeds a node address or a routing key, and no
/// lease field at all embeds a routing key. Returns the violations found.
inline std::vector<std::string> audit_unlinkability(const NetDb& db) {
  std::vector<std::string> violations;
  for (const auto& [name, lease] : db.leases()) {
    const std::vector<std::pair<std::string, std::string>> fields = {
        {"pseudonym", lease.pseudonym},
        {"end_to_end_public_key", to_hex(lease.end_to_end_public_key.bytes)},
        {"tunnel_id", std::to_string(lease.tunnel_id)},
    };
    for (const auto& [addr, node] : db.nodes()) {
      const std::string addr_text = addr.to_string();
      const std::string key_hex = to_hex(node.routing_public_key.bytes);
      for (const auto& [field, value] : fields) {
        if (value.find(addr_text) != std::string::npos) {
          violations.push_back(name + "." + field + " embeds address " + addr_text);
        }
        if (value.find(key_hex) != std::string::npos) {
          violations.push_back(name + "." + field + " embeds routing key of " + addr_text);
        }
      }
      if (contains_subsequence(lease.end_to_end_public_key.bytes, node.routing_public_key.bytes)) {
        violations.push_back(name + " end-to-end key equals routing key of " + addr_text);
      }
    }
  }
  return violations;
}

}  // namespace mixsim::netdb
