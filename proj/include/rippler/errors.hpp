#pragma once

#include <stdexcept>
#include <string>

namespace rippler {

/// A colonisation matrix that has zero density under the current
/// parameters (e.g. a colonisation event at a cell with zero pressure).
struct InvalidState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when every cell of the bounds lattice has zero complement mass,
/// so no perturbation can be proposed. Callers treat this as a rejection.
struct NoPerturbableCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a proposal-density sum degenerates to zero.
struct DegenerateProposal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Enumeration request beyond the state-space guard.
struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Risk-ratio scenario with zero global pressure in some posterior sample.
struct UndefinedRatio : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file; message carries file and line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cross-file referential breakage in a dataset; message names the id.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rippler
