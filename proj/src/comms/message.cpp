#include "meshfl/comms/message.hpp"

#include <bit>
#include <cstring>
#include <random>

#include "meshfl/error.hpp"

namespace meshfl {

namespace {

static_assert(std::endian::native == std::endian::little, "wire helpers assume a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

bool known_type(std::uint8_t raw) {
  return raw >= static_cast<std::uint8_t>(MsgType::ConnectTo) &&
         raw <= static_cast<std::uint8_t>(MsgType::ModelsAggregated);
}

}  // namespace

std::string to_string(MsgType type) {
  switch (type) {
    case MsgType::ConnectTo: return "CONNECT_TO";
    case MsgType::Beat: return "BEAT";
    case MsgType::Role: return "ROLE";
    case MsgType::Metrics: return "METRICS";
    case MsgType::Leadership: return "LEADERSHIP";
    case MsgType::StartLearning: return "START_LEARNING";
    case MsgType::StopLearning: return "STOP_LEARNING";
    case MsgType::Params: return "PARAMS";
    case MsgType::Stop: return "STOP";
    case MsgType::ModelsReady: return "MODELS_READY";
    case MsgType::ModelsAggregated: return "MODELS_AGGREGATED";
  }
  return "UNKNOWN";
}

std::size_t MsgIdHash::operator()(const MsgId& id) const noexcept {
  std::uint64_t a, b;
  std::memcpy(&a, id.bytes.data(), 8);
  std::memcpy(&b, id.bytes.data() + 8, 8);
  return std::hash<std::uint64_t>{}(a ^ (b * 0x9E3779B97F4A7C15ull));
}

std::vector<std::uint8_t> encode(const Message& msg) {
  if (msg.payload.size() >= kMaxPayload)
    throw Error(Errc::PayloadTooLarge, std::to_string(msg.payload.size()) + " bytes");
  std::vector<std::uint8_t> out;
  out.reserve(kLengthPrefix + kHeaderSize + msg.payload.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.push_back(msg.version);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  out.push_back(0);  // flags, reserved
  out.push_back(msg.ttl);
  put<std::uint16_t>(out, msg.sender);
  put<std::uint32_t>(out, msg.round);
  out.insert(out.end(), msg.id.bytes.begin(), msg.id.bytes.end());
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

std::size_t frame_length(std::span<const std::uint8_t> prefix) {
  if (prefix.size() < kLengthPrefix) throw Error(Errc::Truncated, "length prefix incomplete");
  const auto len = get<std::uint32_t>(prefix, 0);
  if (len >= kMaxPayload) throw Error(Errc::PayloadTooLarge, std::to_string(len) + " bytes");
  return kLengthPrefix + kHeaderSize + len;
}

Message decode(std::span<const std::uint8_t> frame) {
  const auto total = frame_length(frame);
  if (frame.size() < total)
    throw Error(Errc::Truncated, "frame has " + std::to_string(frame.size()) + " of " +
                                     std::to_string(total) + " bytes");
  Message m;
  std::size_t pos = kLengthPrefix;
  m.version = frame[pos++];
  if (m.version != kProtocolVersion)
    throw Error(Errc::VersionMismatch, "version " + std::to_string(m.version));
  const auto raw_type = frame[pos++];
  if (!known_type(raw_type)) throw Error(Errc::UnknownType, "type byte " + std::to_string(raw_type));
  m.type = static_cast<MsgType>(raw_type);
  ++pos;  // flags
  m.ttl = frame[pos++];
  m.sender = get<std::uint16_t>(frame, pos);
  pos += 2;
  m.round = get<std::uint32_t>(frame, pos);
  pos += 4;
  std::memcpy(m.id.bytes.data(), frame.data() + pos, m.id.bytes.size());
  pos += m.id.bytes.size();
  m.payload.assign(frame.begin() + static_cast<std::ptrdiff_t>(pos),
                   frame.begin() + static_cast<std::ptrdiff_t>(total));
  return m;
}

MsgIdSource::MsgIdSource(NodeId self, std::uint64_t seed) : self_(self) {
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(self) << 48));
  salt_ = rng();
}

MsgId MsgIdSource::next() {
  MsgId id;
  const std::uint64_t count = ++counter_;
  std::memcpy(id.bytes.data(), &self_, 2);
  std::memcpy(id.bytes.data() + 2, &salt_, 6);
  std::memcpy(id.bytes.data() + 8, &count, 8);
  return id;
}

std::vector<std::uint8_t> encode_params(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * values.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) put<float>(out, static_cast<float>(v));
  return out;
}

std::vector<double> decode_params(std::span<const std::uint8_t> payload) {
  if (payload.size() < 4) throw Error(Errc::Truncated, "PARAMS payload lacks element count");
  const auto count = get<std::uint32_t>(payload, 0);
  if (payload.size() != 4 + 4 * static_cast<std::size_t>(count))
    throw Error(Errc::Truncated, "PARAMS payload size does not match element count");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get<float>(payload, 4 + 4 * i);
  return out;
}

std::vector<double> to_wire_precision(std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

std::vector<std::uint8_t> encode_node_list(std::span<const NodeId> ids) {
  std::vector<std::uint8_t> out;
  put<std::uint16_t>(out, static_cast<std::uint16_t>(ids.size()));
  for (auto id : ids) put<std::uint16_t>(out, id);
  return out;
}

std::vector<NodeId> decode_node_list(std::span<const std::uint8_t> payload) {
  if (payload.size() < 2) throw Error(Errc::Truncated, "node list lacks count");
  const auto count = get<std::uint16_t>(payload, 0);
  if (payload.size() != 2 + 2 * static_cast<std::size_t>(count))
    throw Error(Errc::Truncated, "node list size mismatch");
  std::vector<NodeId> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = get<std::uint16_t>(payload, 2 + 2 * i);
  return ids;
}

std::vector<std::uint8_t> encode_node_id(NodeId id) {
  std::vector<std::uint8_t> out;
  put<std::uint16_t>(out, id);
  return out;
}

NodeId decode_node_id(std::span<const std::uint8_t> payload) {
  if (payload.size() != 2) throw Error(Errc::Truncated, "node id payload must be 2 bytes");
  return get<std::uint16_t>(payload, 0);
}

std::vector<std::uint8_t> encode_start(const StartPayload& start) {
  std::vector<std::uint8_t> out;
  put<std::uint32_t>(out, start.rounds);
  put<std::uint32_t>(out, start.epochs);
  return out;
}

StartPayload decode_start(std::span<const std::uint8_t> payload) {
  if (payload.size() != 8) throw Error(Errc::Truncated, "START_LEARNING payload must be 8 bytes");
  return {get<std::uint32_t>(payload, 0), get<std::uint32_t>(payload, 4)};
}

std::vector<std::uint8_t> encode_text(const std::string& text) { return {text.begin(), text.end()}; }

std::string decode_text(std::span<const std::uint8_t> payload) { return {payload.begin(), payload.end()}; }

}  // namespace meshfl
