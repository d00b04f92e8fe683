#pragma once

#include <stdexcept>
#include <string>

namespace bpmnopt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (BPMN XML, stats sidecar, DAG interchange).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A BPMN construct could not be translated into a token-flow DAG.
class MappingError : public Error {
 public:
  using Error::Error;
};

/// Ordering solvers: oversized instances, cyclic precedence, bad permutations.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace bpmnopt
