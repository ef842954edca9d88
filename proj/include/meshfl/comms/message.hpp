#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "meshfl/topology.hpp"

namespace meshfl {

enum class MsgType : std::uint8_t {
  ConnectTo = 1,
  Beat = 2,
  Role = 3,
  Metrics = 4,
  Leadership = 5,
  StartLearning = 6,
  StopLearning = 7,
  Params = 8,
  Stop = 9,
  ModelsReady = 10,
  ModelsAggregated = 11,
};

inline constexpr std::array<MsgType, 11> kAllMsgTypes = {
    MsgType::ConnectTo,     MsgType::Beat,         MsgType::Role,   MsgType::Metrics,
    MsgType::Leadership,    MsgType::StartLearning, MsgType::StopLearning, MsgType::Params,
    MsgType::Stop,          MsgType::ModelsReady,  MsgType::ModelsAggregated};

std::string to_string(MsgType type);

/// Flooded message classes; the rest only ever travel one hop.
constexpr bool is_forwarding(MsgType type) {
  switch (type) {
    case MsgType::StartLearning:
    case MsgType::StopLearning:
    case MsgType::Params:
    case MsgType::Stop:
    case MsgType::ModelsReady:
    case MsgType::ModelsAggregated:
      return true;
    default:
      return false;
  }
}

struct MsgId {
  std::array<std::uint8_t, 16> bytes{};
  auto operator<=>(const MsgId&) const = default;
};

struct MsgIdHash {
  std::size_t operator()(const MsgId& id) const noexcept;
};

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kLengthPrefix = 4;
inline constexpr std::size_t kHeaderSize = 26;  // version..msg_id
inline constexpr std::size_t kMaxPayload = 64u << 20;

struct Message {
  std::uint8_t version = kProtocolVersion;
  MsgType type = MsgType::Beat;
  std::uint8_t ttl = 0;
  NodeId sender = 0;
  std::uint32_t round = 0;
  MsgId id{};
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Frame: u32 payload length | version | type | flags(0) | ttl | u16 sender |
/// u32 round | 16-byte id | payload. All integers little-endian.
std::vector<std::uint8_t> encode(const Message& msg);
Message decode(std::span<const std::uint8_t> frame);

/// Total frame length implied by a buffer holding at least the length prefix.
std::size_t frame_length(std::span<const std::uint8_t> prefix);

/// Produces unique message ids: sender id, a per-source counter, and random salt.
class MsgIdSource {
 public:
  MsgIdSource(NodeId self, std::uint64_t seed);
  MsgId next();

 private:
  NodeId self_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_;
};

// Typed payloads. PARAMS carries parameters as 32-bit floats.
std::vector<std::uint8_t> encode_params(std::span<const double> values);
std::vector<double> decode_params(std::span<const std::uint8_t> payload);
/// Rounds every value through the 32-bit wire representation.
std::vector<double> to_wire_precision(std::span<const double> values);

std::vector<std::uint8_t> encode_node_list(std::span<const NodeId> ids);
std::vector<NodeId> decode_node_list(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_node_id(NodeId id);
NodeId decode_node_id(std::span<const std::uint8_t> payload);

struct StartPayload {
  std::uint32_t rounds = 0;
  std::uint32_t epochs = 0;
  friend bool operator==(const StartPayload&, const StartPayload&) = default;
};
std::vector<std::uint8_t> encode_start(const StartPayload& start);
StartPayload decode_start(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_text(const std::string& text);
std::string decode_text(std::span<const std::uint8_t> payload);

}  // namespace meshfl
