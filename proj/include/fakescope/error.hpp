#pragma once

#include <stdexcept>
#include <string>

namespace fakescope {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input documents or corpora are malformed.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A detection model could not be built, loaded or queried.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Model file is corrupt, truncated or carries the wrong version.
class FormatError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// The model was asked for a scoring mode it does not support.
class CapabilityError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// An external model adapter did not answer within its deadline.
class AdapterTimeout : public ModelError {
 public:
  using ModelError::ModelError;
};

/// An external model adapter answered with something unusable.
class AdapterProtocolError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// The adapter returned tokens outside its declared vocabulary.
class VocabularyMismatch : public AdapterProtocolError {
 public:
  using AdapterProtocolError::AdapterProtocolError;
};

}  // namespace fakescope
