// Field specifications: terms joined by '+', each one of
//   const:c          constant c
//   sph:l:m:a        a * Y_l^m on the sphere factor
//   t1:k1:k2:a       a * Fourier mode (k1, k2) on a first torus factor
//   torus:k1:k2:a    a * Fourier mode (k1, k2) on the torus factor
//   random:a         a * seeded random band-limited field of unit sup norm
//   bump:a           a * smooth nonnegative bump of unit height

#ifndef QFLOW_CLI_FIELDS_HPP
#define QFLOW_CLI_FIELDS_HPP

#include "qflow/spectral_geometry.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace qflow::cli {

using Field = ScalarField<double>;
using Grid = GridPtr<double>;

/// Zero-mean random field with coefficients N(0,1)/(1 + lambda + mu),
/// normalized to unit sup norm.
Field random_band_limited(const Grid& grid, std::mt19937_64& rng);

/// ((1 + cos theta)/2)^2 on a sphere factor, (1 + cos(2 pi x / L))/2 on a
/// torus factor, multiplied across factors.
Field bump(const Grid& grid);

/// Random terms draw from one engine seeded with `seed`, in order.
Field parse_field(const std::string& spec, const Grid& grid, std::uint64_t seed);

}  // namespace qflow::cli

#endif  // QFLOW_CLI_FIELDS_HPP
