#pragma once

// Seeded discrete-event simulator of a tunnel-based mix network.
//
// Requests travel sender -> outbound tunnel hops -> inbound gateway as an
// onion (one layer per hop, the gateway's layer says DELIVER). The gateway
// then pushes the fragment through the recipient's inbound tunnel, where every
// hop adds a keystream layer that only the tunnel owner can strip.
//
// Every link transmission is recorded with synthetic IPv4/TCP/UDP metadata
// and a link-encrypted payload, so captures look like what a passive observer
// at a node would see.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/crypto/cipher.hpp"
#include "mixsim/crypto/onion.hpp"
#include "mixsim/error.hpp"
#include "mixsim/netdb/netdb.hpp"
#include "mixsim/rng.hpp"
#include "mixsim/simnet/churn.hpp"
#include "mixsim/simnet/config.hpp"
#include "mixsim/simnet/fragment.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::simnet {

enum class TunnelDirection : std::uint8_t { Outbound, Inbound };
enum class TunnelStatus : std::uint8_t { Building, Established, EstablishedExploratory, Expired };

constexpr std::string_view to_string(TunnelDirection d) { return d == TunnelDirection::Outbound ? "Outbound" : "Inbound"; }

constexpr std::string_view to_string(TunnelStatus s) {
  switch (s) {
    case TunnelStatus::Building: return "Building";
    case TunnelStatus::Established: return "Established";
    case TunnelStatus::EstablishedExploratory: return "EstablishedExploratory";
    case TunnelStatus::Expired: return "Expired";
  }
  return "?";
}

struct TunnelSpec {
  std::uint32_t id = 0;
  TunnelDirection direction = TunnelDirection::Outbound;
  NodeAddress owner;
  std::vector<NodeAddress> hops;
  double created_at = 0.0;
  double expires_at = 0.0;
  TunnelStatus status = TunnelStatus::Building;
};

enum class MessageKind : std::uint8_t { Onion = 0x4F, Tunnel = 0x54, Direct = 0x44, Ack = 0x00 };

inline constexpr int kBackgroundClass = 1;

/// Envelope placed in the onion core: type, inbound tunnel id, message id,
/// fragment index, fragment count, then the cell.
inline constexpr std::uint8_t kEnvelopeInbound = 0x01;
inline constexpr std::size_t kEnvelopeHeaderSize = 1 + 4 + 4 + 2 + 2;
inline constexpr std::size_t kTunnelIvSize = 16;
inline constexpr std::size_t kTunnelBodyExtra = 48;
inline constexpr std::size_t kTcpHeaderSize = 20;
inline constexpr std::size_t kUdpHeaderSize = 8;
inline constexpr std::size_t kIpv4HeaderSize = 20;
inline constexpr std::size_t kMaxWireSize = 1280;

/// One packet on one link, as recorded by the simulator.
struct Transmission {
  double send_time = 0.0;
  double arrive_time = 0.0;
  NodeAddress src;
  NodeAddress dst;
  trace::Protocol protocol = trace::Protocol::TCP;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  std::uint8_t tcp_flags = 0;
  std::uint16_t tcp_window = 0;
  std::uint16_t ip_id = 0;
  std::uint8_t ip_ttl = 64;
  Bytes wire;
  MessageKind kind = MessageKind::Direct;
  int class_tag = kBackgroundClass;
  std::uint64_t request_id = 0;
  std::uint32_t tunnel_id = 0;
  bool dropped = false;

  std::size_t ip_len() const {
    return kIpv4HeaderSize + (protocol == trace::Protocol::TCP ? kTcpHeaderSize : kUdpHeaderSize) + wire.size();
  }
};

/// What one node learned while forwarding one request cell.
struct HopLog {
  NodeAddress node;
  std::uint64_t request_id = 0;
  TunnelDirection leg = TunnelDirection::Outbound;
  std::uint32_t tunnel_id = 0;
  NodeAddress prev;
  std::optional<NodeAddress> next;
  double time = 0.0;
};

struct Delivery {
  std::uint64_t request_id = 0;
  NodeAddress recipient;
  std::string pseudonym;
  Bytes payload;
  double time = 0.0;
};

struct RequestInfo {
  std::uint64_t id = 0;
  NodeAddress sender;
  std::string pseudonym;
  int class_tag = kBackgroundClass;
  std::uint32_t outbound_tunnel = 0;
  std::uint32_t inbound_tunnel = 0;
  NodeAddress gateway;
  std::size_t route_length = 0;
  std::size_t cells = 0;
  double created_at = 0.0;
};

struct SimStats {
  std::size_t injected_cells = 0;
  std::size_t delivered_cells = 0;
  std::size_t dropped_cells = 0;
  std::size_t misrouted_cells = 0;
  std::size_t failed_scheduled_requests = 0;
};

class Simulation {
 public:
  /// Registers node_count nodes with fresh routing and end-to-end keys.
  explicit Simulation(SimConfig config)
      : config_((validate(config), std::move(config))),
        netdb_(config_.strict_netdb),
        master_(config_.seed),
        key_rng_(master_.fork(1)),
        tunnel_rng_(master_.fork(2)),
        link_rng_(master_.fork(3)),
        traffic_rng_(master_.fork(4)),
        background_rng_(master_.fork(5)),
        churn_rng_(master_.fork(6)),
        content_rng_(master_.fork(7)) {
    const std::uint32_t first = NodeAddress::parse(config_.first_address).value();
    nodes_.reserve(config_.node_count);
    for (std::size_t i = 0; i < config_.node_count; ++i) {
      Node n;
      n.address = NodeAddress(first + static_cast<std::uint32_t>(i));
      n.routing = crypto::generate_keypair(crypto::KeyPurpose::Routing, key_rng_);
      n.e2e = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, key_rng_);
      n.pseudonym = netdb::derive_pseudonym(n.e2e.public_key);
      n.router_port = static_cast<std::uint16_t>(key_rng_.uniform_int(9000, 31000));
      n.next_ip_id = static_cast<std::uint16_t>(key_rng_.uniform_int(0, 0xFFFF));
      index_.emplace(n.address, nodes_.size());
      netdb_.register_node(n.address, n.routing.public_key);
      nodes_.push_back(std::move(n));
    }
  }

  const SimConfig& config() const { return config_; }
  const netdb::NetDb& netdb() const { return netdb_; }
  double now() const { return now_; }

  std::vector<NodeAddress> addresses() const {
    std::vector<NodeAddress> out;
    for (const auto& n : nodes_) out.push_back(n.address);
    return out;
  }

  /// Address of the i-th node (0-based, in registration order).
  NodeAddress address(std::size_t i) const { return nodes_.at(i).address; }

  const std::string& pseudonym_of(NodeAddress addr) const { return node(addr).pseudonym; }
  bool online(NodeAddress addr) const { return node(addr).online; }
  std::uint16_t router_port(NodeAddress addr) const { return node(addr).router_port; }

  /// Builds a tunnel of `length` hops (default: the configured length).
  /// Inbound tunnels publish a lease through one of the owner's outbound
  /// tunnels.
  TunnelSpec build_tunnel(NodeAddress owner, TunnelDirection direction, std::optional<std::size_t> length = {},
                          bool exploratory = false) {
    Node& o = node(owner);
    if (!o.online) fail(Errc::NodeOffline, owner.to_string());
    if (direction == TunnelDirection::Inbound && !usable_outbound(owner, true)) {
      fail(Errc::NoOutboundTunnel, "inbound tunnel for " + owner.to_string() + " needs an outbound tunnel first");
    }
    const std::size_t len = length.value_or(direction == TunnelDirection::Outbound ? config_.outbound_tunnel_length
                                                                                  : config_.inbound_tunnel_length);
    std::set<NodeAddress> exclude{owner};
    for (const auto& n : nodes_) {
      if (!n.online) exclude.insert(n.address);
    }
    const auto route = netdb_.sample_route(len, exclude, tunnel_rng_);

    TunnelState st;
    st.spec.id = fresh_tunnel_id();
    st.spec.direction = direction;
    st.spec.owner = owner;
    for (const auto& hop : route) st.spec.hops.push_back(hop.address);
    st.spec.created_at = now_;
    st.spec.expires_at = now_ + config_.tunnel_lifetime;
    st.spec.status = exploratory ? TunnelStatus::EstablishedExploratory : TunnelStatus::Established;

    if (direction == TunnelDirection::Inbound) {
      for (std::size_t i = 0; i < st.spec.hops.size(); ++i) {
        Bytes key(crypto::kKeySize);
        for (auto& b : key) b = static_cast<std::uint8_t>(tunnel_rng_.next_u64());
        const NodeAddress next = i + 1 < st.spec.hops.size() ? st.spec.hops[i + 1] : owner;
        participants_[{st.spec.hops[i], st.spec.id}] = Participant{next, key, i == 0};
        st.layer_keys.push_back(std::move(key));
      }
      netdb::LeaseRecord lease{o.pseudonym, o.e2e.public_key, st.spec.hops.front(), st.spec.id,
                               now_ + config_.lease_lifetime};
      netdb_.publish_lease(std::move(lease), netdb::DeliveryChannel::OutboundTunnel, now_);
    }
    const TunnelSpec spec = st.spec;
    tunnel_order_.push_back(spec.id);
    tunnels_.emplace(spec.id, std::move(st));
    schedule(spec.expires_at, TunnelExpiry{spec.id});
    return spec;
  }

  std::vector<TunnelSpec> tunnels() const {
    std::vector<TunnelSpec> out;
    for (auto id : tunnel_order_) out.push_back(tunnels_.at(id).spec);
    return out;
  }

  std::vector<TunnelSpec> tunnels_of(NodeAddress owner, TunnelDirection direction) const {
    std::vector<TunnelSpec> out;
    for (auto id : tunnel_order_) {
      const auto& s = tunnels_.at(id).spec;
      if (s.owner == owner && s.direction == direction) out.push_back(s);
    }
    return out;
  }

  /// Injects a request now. Returns the request id.
  std::uint64_t send_request(NodeAddress sender, const std::string& pseudonym, ByteView payload, int class_tag) {
    return send_request_impl(sender, pseudonym, payload, class_tag, std::nullopt);
  }

  /// Same as send_request() but forces a specific outbound tunnel.
  std::uint64_t send_request_via(NodeAddress sender, std::uint32_t outbound_tunnel, const std::string& pseudonym,
                                 ByteView payload, int class_tag) {
    return send_request_impl(sender, pseudonym, payload, class_tag, outbound_tunnel);
  }

  /// Queues a request to be injected at time `at`. Failures at that time
  /// (expired lease, no tunnel, sender offline) are counted, not thrown.
  void schedule_request(double at, NodeAddress sender, std::string pseudonym, Bytes payload, int class_tag) {
    schedule(at, ScheduledRequest{sender, std::move(pseudonym), std::move(payload), class_tag});
  }

  /// Processes every event with time <= until, in (time, insertion) order.
  void run(double until) {
    start_background();
    while (!queue_.empty() && queue_.front().time <= until) {
      std::pop_heap(queue_.begin(), queue_.end(), Later{});
      Event ev = std::move(queue_.back());
      queue_.pop_back();
      now_ = ev.time;
      std::visit([this](auto& body) { handle(body); }, ev.body);
    }
    now_ = std::max(now_, until);
  }

  /// Every transmission with src or dst in `vantages`, ordered by the time it
  /// was seen there, as a labeled trace.
  trace::Trace capture(const std::set<NodeAddress>& vantages) const {
    for (auto v : vantages) node(v);
    struct Seen {
      double time;
      std::size_t index;
    };
    std::vector<Seen> seen;
    for (std::size_t i = 0; i < transmissions_.size(); ++i) {
      const auto& t = transmissions_[i];
      if (vantages.contains(t.src)) {
        seen.push_back({t.send_time, i});
      } else if (vantages.contains(t.dst) && !t.dropped && t.arrive_time <= now_) {
        seen.push_back({t.arrive_time, i});
      }
    }
    std::stable_sort(seen.begin(), seen.end(), [](const Seen& a, const Seen& b) { return a.time < b.time; });

    trace::Trace out;
    out.provenance = trace::Provenance::Simulated;
    std::uint64_t frame = 0;
    for (const auto& s : seen) {
      const auto& t = transmissions_[s.index];
      trace::TraceRecord r;
      r.timestamp = s.time;
      r.frame_num = r.old_frame_num = ++frame;
      r.src_ip = t.src.to_string();
      r.dst_ip = t.dst.to_string();
      r.src_port = t.src_port;
      r.dst_port = t.dst_port;
      r.protocol = t.protocol;
      r.ip_len = static_cast<std::uint16_t>(t.ip_len());
      r.ip_ttl = t.ip_ttl;
      r.ip_id = t.ip_id;
      if (t.protocol == trace::Protocol::TCP) {
        r.tcp_seq = t.tcp_seq;
        r.tcp_ack = t.tcp_ack;
        r.tcp_flags = t.tcp_flags;
        r.tcp_window = t.tcp_window;
        r.tcp_dataofs = 5;
      }
      r.payload = t.wire;
      r.payload_size = static_cast<std::uint32_t>(t.wire.size());
      r.ground_truth_class = t.class_tag;
      out.records.push_back(std::move(r));
    }
    return out;
  }

  trace::Trace capture(NodeAddress vantage) const { return capture(std::set<NodeAddress>{vantage}); }

  /// Current inbound gateway for `pseudonym`, if its lease is live.
  std::optional<NodeAddress> gateway_of(const std::string& pseudonym) const {
    auto lease = netdb_.lookup_lease(pseudonym, now_);
    if (!lease) return std::nullopt;
    return lease->inbound_gateway_address;
  }

  const std::vector<Transmission>& transmissions() const { return transmissions_; }
  const std::vector<HopLog>& hop_logs() const { return hop_logs_; }
  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  const std::map<std::uint64_t, RequestInfo>& requests() const { return requests_; }
  const std::vector<std::pair<double, std::set<NodeAddress>>>& online_history() const { return online_history_; }
  const SimStats& stats() const { return stats_; }
  std::size_t pending_events() const { return queue_.size(); }

 private:
  struct Node {
    NodeAddress address;
    crypto::KeyPair routing;
    crypto::KeyPair e2e;
    std::string pseudonym;
    std::uint16_t router_port = 0;
    std::uint16_t next_ip_id = 0;
    bool online = true;
  };

  struct TunnelState {
    TunnelSpec spec;
    std::vector<Bytes> layer_keys;  // inbound only, one per hop
  };

  struct Participant {
    NodeAddress next;
    Bytes layer_key;
    bool gateway = false;
  };

  struct TcpConnection {
    NodeAddress initiator;
    std::uint16_t initiator_port = 0;
    std::uint32_t next_seq[2] = {0, 0};  // [0]: lo -> hi, [1]: hi -> lo
    std::uint16_t window[2] = {0, 0};
  };

  struct Reassembly {
    std::uint16_t count = 0;
    std::map<std::uint16_t, Bytes> cells;
  };

  struct PacketArrival {
    std::size_t transmission = 0;
    Bytes body;
    Bytes iv;
  };
  struct BackgroundTick {
    std::size_t flow = 0;
  };
  struct TunnelTrafficTick {
    std::size_t flow = 0;
  };
  struct TunnelExpiry {
    std::uint32_t tunnel_id = 0;
  };
  struct ChurnEvent {};
  struct ScheduledRequest {
    NodeAddress sender;
    std::string pseudonym;
    Bytes payload;
    int class_tag = kBackgroundClass;
  };

  using EventBody = std::variant<PacketArrival, BackgroundTick, TunnelTrafficTick, TunnelExpiry, ChurnEvent,
                                 ScheduledRequest>;
  struct Event {
    double time = 0.0;
    std::uint64_t seq = 0;
    EventBody body;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  Node& node(NodeAddress addr) {
    auto it = index_.find(addr);
    if (it == index_.end()) fail(Errc::UnknownNode, addr.to_string());
    return nodes_[it->second];
  }
  const Node& node(NodeAddress addr) const {
    auto it = index_.find(addr);
    if (it == index_.end()) fail(Errc::UnknownNode, addr.to_string());
    return nodes_[it->second];
  }

  template <class Body>
  void schedule(double at, Body body) {
    queue_.push_back(Event{at, next_seq_++, EventBody(std::move(body))});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
  }

  std::uint32_t fresh_tunnel_id() {
    for (;;) {
      const auto id = static_cast<std::uint32_t>(tunnel_rng_.uniform_int(1, 0xFFFFFFFFu));
      if (!tunnels_.contains(id)) return id;
    }
  }

  bool tunnel_live(const TunnelSpec& s) const {
    return s.status != TunnelStatus::Expired && s.status != TunnelStatus::Building && s.expires_at > now_;
  }

  const TunnelState* usable_outbound(NodeAddress owner, bool allow_exploratory) const {
    for (auto it = tunnel_order_.rbegin(); it != tunnel_order_.rend(); ++it) {
      const auto& st = tunnels_.at(*it);
      if (st.spec.owner != owner || st.spec.direction != TunnelDirection::Outbound || !tunnel_live(st.spec)) continue;
      if (!allow_exploratory && st.spec.status == TunnelStatus::EstablishedExploratory) continue;
      return &st;
    }
    return nullptr;
  }

  std::vector<const TunnelState*> client_outbound(NodeAddress owner) const {
    std::vector<const TunnelState*> out;
    for (auto id : tunnel_order_) {
      const auto& st = tunnels_.at(id);
      if (st.spec.owner == owner && st.spec.direction == TunnelDirection::Outbound &&
          st.spec.status == TunnelStatus::Established && tunnel_live(st.spec)) {
        out.push_back(&st);
      }
    }
    return out;
  }

  std::size_t cell_capacity(std::size_t route_length) const {
    if (config_.onion_mode == crypto::OnionMode::Naive) return config_.cell_size;
    return crypto::padded_core_capacity(route_length, config_.cell_size) - kEnvelopeHeaderSize - kCellHeaderSize;
  }

  std::size_t tunnel_body_size() const { return config_.cell_size + kTunnelBodyExtra; }

  std::uint64_t send_request_impl(NodeAddress sender, const std::string& pseudonym, ByteView payload, int class_tag,
                                  std::optional<std::uint32_t> forced_tunnel) {
    Node& s = node(sender);
    if (!s.online) fail(Errc::NodeOffline, sender.to_string());
    const auto lease = netdb_.lookup_lease(pseudonym, now_);
    if (!lease) fail(Errc::UnknownPseudonym, pseudonym);

    const TunnelState* out = nullptr;
    if (forced_tunnel) {
      auto it = tunnels_.find(*forced_tunnel);
      if (it == tunnels_.end() || it->second.spec.owner != sender ||
          it->second.spec.direction != TunnelDirection::Outbound || !tunnel_live(it->second.spec)) {
        fail(Errc::NoTunnel, "tunnel " + std::to_string(*forced_tunnel) + " is not a live outbound tunnel of " +
                                 sender.to_string());
      }
      out = &it->second;
    } else {
      const auto candidates = client_outbound(sender);
      if (candidates.empty()) fail(Errc::NoTunnel, sender.to_string() + " has no established outbound tunnel");
      out = candidates[traffic_rng_.index(candidates.size())];
    }

    std::vector<crypto::RouteHop> route;
    for (auto hop : out->spec.hops) route.push_back({netdb_.lookup_node(hop)->routing_public_key, hop});
    route.push_back({netdb_.lookup_node(lease->inbound_gateway_address)->routing_public_key,
                     lease->inbound_gateway_address});

    const Bytes sealed =
        crypto::seal(lease->end_to_end_public_key, crypto::KeyPurpose::EndToEnd, payload, traffic_rng_.next_u64());
    const auto cells = fragment(sealed, cell_capacity(route.size()));
    const auto msg_id = static_cast<std::uint32_t>(traffic_rng_.next_u64());

    RequestInfo info;
    info.id = next_request_id_++;
    info.sender = sender;
    info.pseudonym = pseudonym;
    info.class_tag = class_tag;
    info.outbound_tunnel = out->spec.id;
    info.inbound_tunnel = lease->tunnel_id;
    info.gateway = lease->inbound_gateway_address;
    info.route_length = route.size();
    info.cells = cells.size();
    info.created_at = now_;
    requests_.emplace(info.id, info);

    for (std::size_t i = 0; i < cells.size(); ++i) {
      Bytes core;
      core.push_back(kEnvelopeInbound);
      put_u32(core, lease->tunnel_id);
      put_u32(core, msg_id);
      put_u16(core, static_cast<std::uint16_t>(i));
      put_u16(core, static_cast<std::uint16_t>(cells.size()));
      append(core, cells[i]);
      auto onion = crypto::wrap(route, core, config_.onion_mode, traffic_rng_.next_u64(), config_.cell_size);
      transmit(sender, route.front().address, MessageKind::Onion, std::move(onion.blob), 0, {}, info.id, class_tag);
      ++stats_.injected_cells;
    }
    return info.id;
  }

  trace::Protocol link_protocol(NodeAddress a, NodeAddress b, std::uint32_t tunnel_id) {
    const auto key = std::make_tuple(std::min(a, b), std::max(a, b), tunnel_id);
    auto it = link_protocol_.find(key);
    if (it != link_protocol_.end()) return it->second;
    const auto p = link_rng_.bernoulli(config_.udp_probability) ? trace::Protocol::UDP : trace::Protocol::TCP;
    link_protocol_.emplace(key, p);
    return p;
  }

  TcpConnection& tcp_connection(NodeAddress src, NodeAddress dst) {
    const auto key = std::make_pair(std::min(src, dst), std::max(src, dst));
    auto it = tcp_.find(key);
    if (it != tcp_.end()) return it->second;
    TcpConnection c;
    c.initiator = src;
    c.initiator_port = static_cast<std::uint16_t>(link_rng_.uniform_int(32768, 60999));
    for (int d = 0; d < 2; ++d) {
      c.next_seq[d] = static_cast<std::uint32_t>(link_rng_.next_u64());
      c.window[d] = static_cast<std::uint16_t>(link_rng_.uniform_int(16384, 65535));
    }
    return tcp_.emplace(key, c).first->second;
  }

  double sample_latency() {
    const double ms = traffic_rng_.normal(config_.link_latency.mean_ms, config_.link_latency.jitter_ms);
    return std::max(ms, 0.05) / 1000.0;
  }

  void fill_transport(Transmission& t, std::uint32_t tunnel_id, bool pure_ack) {
    Node& s = node(t.src);
    Node& d = node(t.dst);
    t.protocol = pure_ack ? trace::Protocol::TCP : link_protocol(t.src, t.dst, tunnel_id);
    t.ip_ttl = config_.ip_ttl;
    t.ip_id = s.next_ip_id++;
    if (t.protocol == trace::Protocol::UDP) {
      t.src_port = s.router_port;
      t.dst_port = d.router_port;
      return;
    }
    auto& c = tcp_connection(t.src, t.dst);
    const int dir = t.src < t.dst ? 0 : 1;
    t.src_port = t.src == c.initiator ? c.initiator_port : s.router_port;
    t.dst_port = t.dst == c.initiator ? c.initiator_port : d.router_port;
    t.tcp_seq = c.next_seq[dir];
    t.tcp_ack = c.next_seq[1 - dir];
    t.tcp_window = c.window[dir];
    t.tcp_flags = pure_ack ? trace::tcp_flag::kAck : static_cast<std::uint8_t>(trace::tcp_flag::kPsh | trace::tcp_flag::kAck);
    c.next_seq[dir] += static_cast<std::uint32_t>(t.wire.size());
  }

  Bytes link_encrypt(NodeAddress a, NodeAddress b, Bytes wire) {
    Bytes pair;
    put_u32(pair, std::min(a, b).value());
    put_u32(pair, std::max(a, b).value());
    put_u64(pair, config_.seed);
    const auto key = crypto::sha256({as_bytes("mixsim.link"), pair});
    Bytes nonce;
    put_u64(nonce, ++link_counter_);
    put_u64(nonce, 0);
    crypto::keystream_xor(key, nonce, wire);
    return wire;
  }

  void transmit(NodeAddress src, NodeAddress dst, MessageKind kind, Bytes body, std::uint32_t tunnel_id, Bytes iv,
                std::uint64_t request_id, int class_tag) {
    Bytes wire;
    wire.reserve(1 + 4 + iv.size() + body.size() + config_.link_padding_max);
    wire.push_back(static_cast<std::uint8_t>(kind));
    if (kind == MessageKind::Tunnel) {
      put_u32(wire, tunnel_id);
      append(wire, iv);
    }
    append(wire, body);
    if (config_.link_padding_max > 0) {
      const auto extra = static_cast<std::size_t>(content_rng_.uniform_int(0, config_.link_padding_max));
      for (std::size_t i = 0; i < extra; ++i) wire.push_back(static_cast<std::uint8_t>(content_rng_.next_u64()));
    }

    Transmission t;
    t.src = src;
    t.dst = dst;
    t.kind = kind;
    t.class_tag = class_tag;
    t.request_id = request_id;
    t.tunnel_id = tunnel_id;
    t.wire = link_encrypt(src, dst, std::move(wire));
    t.send_time = now_;
    fill_transport(t, kind == MessageKind::Direct ? 0 : (tunnel_id != 0 ? tunnel_id : route_key(request_id)), false);
    t.arrive_time = now_ + sample_latency();
    const double arrive = t.arrive_time;
    transmissions_.push_back(std::move(t));
    schedule(arrive, PacketArrival{transmissions_.size() - 1, std::move(body), std::move(iv)});
  }

  // Onion legs of one request share a transport draw per link, like a tunnel.
  std::uint32_t route_key(std::uint64_t request_id) const {
    auto it = requests_.find(request_id);
    return it != requests_.end() ? it->second.outbound_tunnel : 0;
  }

  void maybe_ack(const Transmission& data) {
    if (data.protocol != trace::Protocol::TCP || data.wire.empty()) return;
    if (!link_rng_.bernoulli(config_.ack_probability)) return;
    Transmission ack;
    ack.src = data.dst;
    ack.dst = data.src;
    ack.kind = MessageKind::Ack;
    ack.class_tag = data.class_tag;
    ack.request_id = data.request_id;
    ack.tunnel_id = data.tunnel_id;
    ack.send_time = now_;
    fill_transport(ack, 0, true);
    ack.arrive_time = now_ + sample_latency();
    transmissions_.push_back(std::move(ack));
  }

  void handle(PacketArrival& ev) {
    Transmission& t = transmissions_[ev.transmission];
    Node& n = node(t.dst);
    const bool carries_cell = t.kind == MessageKind::Onion || t.kind == MessageKind::Tunnel;
    if (!n.online) {
      t.dropped = true;
      if (carries_cell) ++stats_.dropped_cells;
      return;
    }
    const Transmission copy_meta = t;  // transmissions_ may grow below
    maybe_ack(copy_meta);
    if (copy_meta.kind == MessageKind::Onion) {
      handle_onion(copy_meta, std::move(ev.body));
    } else if (copy_meta.kind == MessageKind::Tunnel) {
      handle_tunnel(copy_meta, std::move(ev.body), std::move(ev.iv));
    }
  }

  void handle_onion(const Transmission& t, Bytes body) {
    const Node& n = node(t.dst);
    crypto::RoutingInstruction instr;
    try {
      instr = crypto::peel(n.routing.private_key, crypto::OnionMessage{config_.onion_mode, std::move(body),
                                                                       config_.cell_size});
    } catch (const Error&) {
      ++stats_.misrouted_cells;
      return;
    }
    if (!instr.is_deliver()) {
      hop_logs_.push_back({n.address, t.request_id, TunnelDirection::Outbound, 0, t.src, instr.next_hop, now_});
      transmit(n.address, *instr.next_hop, MessageKind::Onion, std::move(instr.inner), 0, {}, t.request_id,
               t.class_tag);
      return;
    }
    const Bytes& core = instr.inner;
    if (core.size() < 5 || core[0] != kEnvelopeInbound) {
      ++stats_.misrouted_cells;
      return;
    }
    const std::uint32_t tid = get_u32(core, 1);
    auto it = participants_.find({n.address, tid});
    if (it == participants_.end() || !it->second.gateway) {
      ++stats_.misrouted_cells;
      return;
    }
    hop_logs_.push_back({n.address, t.request_id, TunnelDirection::Outbound, 0, t.src, std::nullopt, now_});
    Bytes tunnel_body;
    put_u16(tunnel_body, static_cast<std::uint16_t>(core.size() - 5));
    tunnel_body.insert(tunnel_body.end(), core.begin() + 5, core.end());
    if (config_.onion_mode == crypto::OnionMode::Padded) {
      const std::size_t used = tunnel_body.size();
      tunnel_body.resize(tunnel_body_size(), 0);
      for (std::size_t i = used; i < tunnel_body.size(); ++i) {
        tunnel_body[i] = static_cast<std::uint8_t>(content_rng_.next_u64());
      }
    }
    Bytes iv(kTunnelIvSize);
    for (auto& b : iv) b = static_cast<std::uint8_t>(content_rng_.next_u64());
    forward_tunnel(n.address, t.src, tid, it->second, std::move(tunnel_body), std::move(iv), t);
  }

  void forward_tunnel(NodeAddress self, NodeAddress prev, std::uint32_t tid, const Participant& p, Bytes body,
                      Bytes iv, const Transmission& t) {
    crypto::keystream_xor(p.layer_key, iv, body);
    hop_logs_.push_back({self, t.request_id, TunnelDirection::Inbound, tid, prev, p.next, now_});
    transmit(self, p.next, MessageKind::Tunnel, std::move(body), tid, std::move(iv), t.request_id, t.class_tag);
  }

  void handle_tunnel(const Transmission& t, Bytes body, Bytes iv) {
    const Node& n = node(t.dst);
    auto pit = participants_.find({n.address, t.tunnel_id});
    if (pit != participants_.end()) {
      const Participant p = pit->second;
      forward_tunnel(n.address, t.src, t.tunnel_id, p, std::move(body), std::move(iv), t);
      return;
    }
    auto tit = tunnels_.find(t.tunnel_id);
    if (tit == tunnels_.end() || tit->second.spec.owner != n.address ||
        tit->second.spec.direction != TunnelDirection::Inbound) {
      ++stats_.misrouted_cells;
      return;
    }
    for (const auto& key : tit->second.layer_keys) crypto::keystream_xor(key, iv, body);
    hop_logs_.push_back({n.address, t.request_id, TunnelDirection::Inbound, t.tunnel_id, t.src, std::nullopt, now_});
    ++stats_.delivered_cells;

    if (body.size() < 2) return;
    const std::size_t len = get_u16(body, 0);
    if (2 + len > body.size() || len < 8) {
      ++stats_.misrouted_cells;
      return;
    }
    const ByteView frag(body.data() + 2, len);
    const std::uint32_t msg_id = get_u32(frag, 0);
    const std::uint16_t idx = get_u16(frag, 4);
    const std::uint16_t count = get_u16(frag, 6);
    auto& r = reassembly_[{n.address, msg_id}];
    r.count = count;
    r.cells[idx] = Bytes(frag.begin() + 8, frag.end());
    if (r.cells.size() < r.count) return;

    std::vector<Bytes> ordered;
    for (auto& [i, cell] : r.cells) ordered.push_back(std::move(cell));
    reassembly_.erase({n.address, msg_id});
    Delivery d;
    d.request_id = t.request_id;
    d.recipient = n.address;
    d.pseudonym = n.pseudonym;
    d.time = now_;
    try {
      d.payload = crypto::open(n.e2e.private_key, crypto::KeyPurpose::EndToEnd, reassemble(ordered));
    } catch (const Error&) {
      ++stats_.misrouted_cells;
      return;
    }
    deliveries_.push_back(std::move(d));
  }

  void handle(BackgroundTick& ev) {
    const auto [a, b] = background_pairs_[ev.flow];
    const bool forward = background_rng_.bernoulli(0.5);
    const NodeAddress src = forward ? a : b;
    const NodeAddress dst = forward ? b : a;
    const auto size =
        static_cast<std::size_t>(background_rng_.uniform_int(config_.background_min_size, config_.background_max_size));
    if (node(src).online) {
      Bytes body(size - 1);
      for (auto& x : body) x = static_cast<std::uint8_t>(content_rng_.next_u64());
      transmit(src, dst, MessageKind::Direct, std::move(body), 0, {}, 0, kBackgroundClass);
    }
    schedule(now_ + background_rng_.exponential(config_.background_rate), BackgroundTick{ev.flow});
  }

  void handle(TunnelTrafficTick& ev) {
    const auto [src, dst] = tunnel_flow_pairs_[ev.flow];
    const auto size = static_cast<std::size_t>(background_rng_.uniform_int(200, 2400));
    Bytes payload(size);
    for (auto& x : payload) x = static_cast<std::uint8_t>(content_rng_.next_u64());
    try {
      send_request(src, node(dst).pseudonym, payload, kBackgroundClass);
    } catch (const Error&) {
      ++stats_.failed_scheduled_requests;
    }
    schedule(now_ + background_rng_.exponential(config_.background_tunnel_rate), TunnelTrafficTick{ev.flow});
  }

  void handle(TunnelExpiry& ev) {
    auto it = tunnels_.find(ev.tunnel_id);
    if (it == tunnels_.end()) return;
    TunnelSpec old = it->second.spec;
    it->second.spec.status = TunnelStatus::Expired;
    for (auto hop : old.hops) participants_.erase({hop, old.id});
    if (!node(old.owner).online) return;
    try {
      build_tunnel(old.owner, old.direction, old.hops.size(), old.status == TunnelStatus::EstablishedExploratory);
    } catch (const Error&) {
      // Rebuild failed (not enough online nodes or no outbound tunnel); the
      // owner stays without a replacement.
    }
  }

  void handle(ChurnEvent&) {
    const auto online = churn_tick(*config_.churn, now_, addresses(), churn_rng_);
    for (auto& n : nodes_) n.online = online.contains(n.address);
    online_history_.emplace_back(now_, online);
    schedule(now_ + config_.churn->tick_interval, ChurnEvent{});
  }

  void handle(ScheduledRequest& ev) {
    try {
      send_request(ev.sender, ev.pseudonym, ev.payload, ev.class_tag);
    } catch (const Error&) {
      ++stats_.failed_scheduled_requests;
    }
  }

  void start_background() {
    if (background_started_) return;
    background_started_ = true;
    const auto all = addresses();
    for (std::size_t f = 0; f < config_.background_flows; ++f) {
      const std::size_t i = background_rng_.index(all.size());
      std::size_t j = background_rng_.index(all.size() - 1);
      if (j >= i) ++j;
      background_pairs_.emplace_back(all[i], all[j]);
      schedule(now_ + background_rng_.exponential(config_.background_rate), BackgroundTick{f});
    }
    for (std::size_t f = 0; f < config_.background_tunnel_flows; ++f) {
      const std::size_t i = background_rng_.index(all.size());
      std::size_t j = background_rng_.index(all.size() - 1);
      if (j >= i) ++j;
      const NodeAddress src = all[i];
      const NodeAddress dst = all[j];
      try {
        if (client_outbound(src).empty()) build_tunnel(src, TunnelDirection::Outbound);
        if (!usable_outbound(dst, true)) build_tunnel(dst, TunnelDirection::Outbound);
        if (!netdb_.lookup_lease(node(dst).pseudonym, now_)) build_tunnel(dst, TunnelDirection::Inbound);
      } catch (const Error&) {
        continue;
      }
      tunnel_flow_pairs_.emplace_back(src, dst);
      schedule(now_ + background_rng_.exponential(config_.background_tunnel_rate),
               TunnelTrafficTick{tunnel_flow_pairs_.size() - 1});
    }
    if (config_.churn) schedule(now_, ChurnEvent{});
  }

  SimConfig config_;
  netdb::NetDb netdb_;
  Rng master_;
  Rng key_rng_;
  Rng tunnel_rng_;
  Rng link_rng_;
  Rng traffic_rng_;
  Rng background_rng_;
  Rng churn_rng_;
  Rng content_rng_;

  std::vector<Node> nodes_;
  std::map<NodeAddress, std::size_t> index_;
  std::map<std::uint32_t, TunnelState> tunnels_;
  std::vector<std::uint32_t> tunnel_order_;
  std::map<std::pair<NodeAddress, std::uint32_t>, Participant> participants_;
  std::map<std::tuple<NodeAddress, NodeAddress, std::uint32_t>, trace::Protocol> link_protocol_;
  std::map<std::pair<NodeAddress, NodeAddress>, TcpConnection> tcp_;
  std::map<std::pair<NodeAddress, std::uint32_t>, Reassembly> reassembly_;
  std::vector<std::pair<NodeAddress, NodeAddress>> background_pairs_;
  std::vector<std::pair<NodeAddress, NodeAddress>> tunnel_flow_pairs_;

  std::vector<Event> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  std::uint64_t next_request_id_ = 1;
  std::uint64_t link_counter_ = 0;
  bool background_started_ = false;

  std::vector<Transmission> transmissions_;
  std::vector<HopLog> hop_logs_;
  std::vector<Delivery> deliveries_;
  std::map<std::uint64_t, RequestInfo> requests_;
  std::vector<std::pair<double, std::set<NodeAddress>>> online_history_;
  SimStats stats_;
};

}  // namespace mixsim::simnet
