#pragma once

#include <stdexcept>
#include <string>

namespace reifsplit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix failed the full-row-rank check of the QR factorization.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class EmptySetError : public Error {
 public:
  using Error::Error;
};

// A requested scale is finer than the sample resolution supports.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class InconsistentCertificateError : public Error {
 public:
  using Error::Error;
};

}  // namespace reifsplit
