#pragma once

#include <stdexcept>
#include <string>

namespace crowdlens {

enum class Errc {
  // image
  UnsupportedMagic,
  MaxvalNot255,
  TruncatedBody,
  BadChannelCount,
  RectOutOfBounds,
  // matrix
  NotSymmetric,
  NoConvergence,
  DimMismatch,
  CholeskyFailure,
  RankDeficient,
  // detectors
  DegenerateInput,
  MissingFeature,
  InsufficientData,
  ImageTooSmall,
  BadWindowSize,
  // fisherfaces
  TooFewSamples,
  NoDiscrimination,
  // analytics
  EmptyGrid,
  MissingHistory,
  // pipeline
  BadUri,
  ConnectFailure,
  ModelLoadFailure,
  SourceFailure,
  // event store
  IoFailure,
  NonMonotonicTimestamp,
  BindFailure,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& msg);
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& msg);

} // namespace crowdlens
