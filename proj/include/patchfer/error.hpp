#pragma once

#include <stdexcept>
#include <string>

namespace patchfer {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  InvalidArgument,
  Geometry,
  Parse,
  Degenerate,
  Stratification,
  Convergence,
  Model,
  Io,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorKind::InvalidArgument, w) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& w) : Error(ErrorKind::Geometry, w) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorKind::Parse, w) {}
};

// LDA with coincident class means, or similar rank collapse.
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w) : Error(ErrorKind::Degenerate, w) {}
};

struct StratificationError : Error {
  explicit StratificationError(const std::string& w) : Error(ErrorKind::Stratification, w) {}
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& w, double gap)
      : Error(ErrorKind::Convergence, w), duality_gap(gap) {}
  double duality_gap;
};

struct ModelError : Error {
  explicit ModelError(const std::string& w) : Error(ErrorKind::Model, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

/// Rethrows `e` as the same concrete type with `context` prefixed to its message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string w = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::InvalidArgument: throw InvalidArgument(w);
    case ErrorKind::Geometry: throw GeometryError(w);
    case ErrorKind::Parse: throw ParseError(w);
    case ErrorKind::Degenerate: throw DegenerateError(w);
    case ErrorKind::Stratification: throw StratificationError(w);
    case ErrorKind::Convergence: {
      const auto* c = dynamic_cast<const ConvergenceError*>(&e);
      throw ConvergenceError(w, c ? c->duality_gap : 0.0);
    }
    case ErrorKind::Model: throw ModelError(w);
    case ErrorKind::Io: throw IoError(w);
  }
  throw Error(e.kind(), w);
}

}  // namespace patchfer
