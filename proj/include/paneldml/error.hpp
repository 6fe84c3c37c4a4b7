#pragma once

#include <stdexcept>
#include <string>

namespace paneldml {

/// Input violates a declared file or vector schema (bad header, wrong arity,
/// non-binary outcome column, ...).
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed input with inadmissible content: out-of-domain values,
/// missing CPI years, duplicate keys.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure: rank deficiency, refusal to use a non-converged fit,
/// degenerate regression targets.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace paneldml
