#include "crowdlens/error.hpp"

namespace crowdlens {

const char* errc_name(Errc c) {
  switch (c) {
  case Errc::UnsupportedMagic: return "UnsupportedMagic";
  case Errc::MaxvalNot255: return "MaxvalNot255";
  case Errc::TruncatedBody: return "TruncatedBody";
  case Errc::BadChannelCount: return "BadChannelCount";
  case Errc::RectOutOfBounds: return "RectOutOfBounds";
  case Errc::NotSymmetric: return "NotSymmetric";
  case Errc::NoConvergence: return "NoConvergence";
  case Errc::DimMismatch: return "DimMismatch";
  case Errc::CholeskyFailure: return "CholeskyFailure";
  case Errc::RankDeficient: return "RankDeficient";
  case Errc::DegenerateInput: return "DegenerateInput";
  case Errc::MissingFeature: return "MissingFeature";
  case Errc::InsufficientData: return "InsufficientData";
  case Errc::ImageTooSmall: return "ImageTooSmall";
  case Errc::BadWindowSize: return "BadWindowSize";
  case Errc::TooFewSamples: return "TooFewSamples";
  case Errc::NoDiscrimination: return "NoDiscrimination";
  case Errc::EmptyGrid: return "EmptyGrid";
  case Errc::MissingHistory: return "MissingHistory";
  case Errc::BadUri: return "BadUri";
  case Errc::ConnectFailure: return "ConnectFailure";
  case Errc::ModelLoadFailure: return "ModelLoadFailure";
  case Errc::SourceFailure: return "SourceFailure";
  case Errc::IoFailure: return "IoFailure";
  case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
  case Errc::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& msg)
    : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace crowdlens
