#pragma once

#include <stdexcept>
#include <string>

namespace moesim {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor rank / dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input values outside an operation's numeric domain (e.g. log of x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad argument values (rates, counts, thresholds, indices).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Backward pass requested for a tensor the tape never produced.
class TapeError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

// Sample-to-expert routing problems.
class RoutingError : public Error {
 public:
  using Error::Error;
};

// Malformed caller-supplied matrices or label vectors.
class InputError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid files (magic numbers, truncation, ragged rows).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A cell or token that failed to parse as the expected type.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Files that are individually valid but mutually inconsistent.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoints from a different format version or corrupted payloads.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

// Referenced dataset rows that are unavailable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses and other unrecoverable optimization states.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Statistics that need more samples than were provided.
class SampleSizeError : public Error {
 public:
  using Error::Error;
};

}  // namespace moesim
