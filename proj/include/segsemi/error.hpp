#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace segsemi {

// Root of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation received tensors whose dimensions do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value that must be finite was NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// DTW has no monotone surjective path (more transcript steps than frames).
class NoValidAlignment : public Error {
 public:
  using Error::Error;
};

// Every candidate transcript was infeasible for the video.
class NoFeasibleCandidate : public Error {
 public:
  using Error::Error;
};

// Beam search had nothing left to expand (all actions masked).
class EmptyBeam : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data. `offset` is a byte offset for binary files and a
// line number for text formats; `where` says which.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::string where, std::size_t offset, const std::string& what)
      : Error(file + ":" + where + " " + std::to_string(offset) + ": " + what),
        file_(std::move(file)),
        where_(std::move(where)),
        offset_(offset) {}

  const std::string& file() const noexcept { return file_; }
  const std::string& where() const noexcept { return where_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::string where_;
  std::size_t offset_;
};

}  // namespace segsemi
