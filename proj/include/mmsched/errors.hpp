#pragma once

#include <stdexcept>
#include <string>

namespace mmsched {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InadmissibleAction : public Error {
 public:
  using Error::Error;
};

class NonPositiveRate : public Error {
 public:
  using Error::Error;
};

class ParamsNotUniformized : public Error {
 public:
  using Error::Error;
};

class OutOfBox : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class NoStabilization : public Error {
 public:
  using Error::Error;
};

class NotThresholdType : public Error {
 public:
  using Error::Error;
};

class PolicyLoop : public Error {
 public:
  using Error::Error;
};

class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

}  // namespace mmsched
