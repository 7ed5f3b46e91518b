#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mixsim {

enum class Errc {
  // crypto / onion
  AuthenticationFailure,
  KeyPurposeMismatch,
  CoreTooLarge,
  EmptyRoute,
  RouteTooLong,
  InvalidAddress,
  // netdb
  DuplicateAddress,
  DirectWriteRejected,
  ExpiredLease,
  NotFound,
  InsufficientNodes,
  // simnet
  InvalidConfig,
  NoOutboundTunnel,
  UnknownPseudonym,
  NoTunnel,
  UnknownNode,
  NodeOffline,
  // trace
  BadMagic,
  UnsupportedLinkType,
  TruncatedRecord,
  AlreadyCurated,
  EmptyPayload,
  MalformedTrace,
  // anonymity
  OutOfRange,
  DegenerateSet,
  NegativeEntropy,
  InvalidDistribution,
  EmptySample,
  EmptyWindow,
  // learn
  SingleClass,
  TooFewSamples,
  KTooLarge,
  ShapeMismatch,
  EmptySplit,
  BadCheckpoint,
  // cli
  ConfigError,
  MissingInput,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::AuthenticationFailure: return "AuthenticationFailure";
    case Errc::KeyPurposeMismatch: return "KeyPurposeMismatch";
    case Errc::CoreTooLarge: return "CoreTooLarge";
    case Errc::EmptyRoute: return "EmptyRoute";
    case Errc::RouteTooLong: return "RouteTooLong";
    case Errc::InvalidAddress: return "InvalidAddress";
    case Errc::DuplicateAddress: return "DuplicateAddress";
    case Errc::DirectWriteRejected: return "DirectWriteRejected";
    case Errc::ExpiredLease: return "ExpiredLease";
    case Errc::NotFound: return "NotFound";
    case Errc::InsufficientNodes: return "InsufficientNodes";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NoOutboundTunnel: return "NoOutboundTunnel";
    case Errc::UnknownPseudonym: return "UnknownPseudonym";
    case Errc::NoTunnel: return "NoTunnel";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::NodeOffline: return "NodeOffline";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedLinkType: return "UnsupportedLinkType";
    case Errc::TruncatedRecord: return "TruncatedRecord";
    case Errc::AlreadyCurated: return "AlreadyCurated";
    case Errc::EmptyPayload: return "EmptyPayload";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DegenerateSet: return "DegenerateSet";
    case Errc::NegativeEntropy: return "NegativeEntropy";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::EmptySample: return "EmptySample";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::SingleClass: return "SingleClass";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::ConfigError: return "ConfigError";
    case Errc::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

/// Every failure raised by the library. `offset()` is set for errors tied to
/// a byte position (pcap parsing) or a line number (config parsing).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::uint64_t> offset = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), offset_(offset) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  Errc code_;
  std::optional<std::uint64_t> offset_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what,
                              std::optional<std::uint64_t> offset = std::nullopt) {
  throw Error(code, what, offset);
}

}  // namespace mixsim
