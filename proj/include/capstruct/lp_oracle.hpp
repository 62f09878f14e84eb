#pragma once

// Exact small-instance reference solver for the check-loss problem, written as the
// linear program
//
//   min  theta * 1'u + (1 - theta) * 1'v
//   s.t. X(b+ - b-) + u - v = y,   b+, b-, u, v >= 0
//
// and solved by a dense tableau simplex with Bland's rule in extended precision.
// Intended for tests and verification only.

#include "capstruct/quantile.hpp"

namespace capstruct {

struct OracleOptions {
  Index max_rows = 200;
  Index max_cols = 8;
};

struct OracleSolution {
  Vector coefficients;
  double objective = 0.0;
  int pivots = 0;
};

/// Throws DataError when the instance exceeds the configured caps.
OracleSolution fit_quantile_oracle(const DesignMatrix& design, double theta,
                                   const OracleOptions& options = {});

}  // namespace capstruct
