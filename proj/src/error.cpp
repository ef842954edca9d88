#include "meshfl/error.hpp"

namespace meshfl {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidSize: return "InvalidSize";
    case Errc::InvalidIndex: return "InvalidIndex";
    case Errc::GenerationFailed: return "GenerationFailed";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::Disconnected: return "Disconnected";
    case Errc::InvalidFraction: return "InvalidFraction";
    case Errc::UnknownTrainer: return "UnknownTrainer";
    case Errc::EmptyData: return "EmptyData";
    case Errc::Diverged: return "Diverged";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TooFewVectors: return "TooFewVectors";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::UnknownType: return "UnknownType";
    case Errc::Truncated: return "Truncated";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::ConnectFailed: return "ConnectFailed";
    case Errc::AlreadyConnected: return "AlreadyConnected";
    case Errc::StartFailed: return "StartFailed";
    case Errc::RoundAborted: return "RoundAborted";
    case Errc::UnknownField: return "UnknownField";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::DeployFailed: return "DeployFailed";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace meshfl
