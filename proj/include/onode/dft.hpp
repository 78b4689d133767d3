#pragma once

#include "onode/field.hpp"

namespace onode {

// Discrete Fourier transforms with the repo-normative convention:
// forward uses the negative exponent and no scale factor, inverse uses the
// positive exponent and carries the 1/N. Backed by FFTW behind this
// surface; plans are cached per length and reused.
void dft_forward(const cvec& in, cvec& out);
void dft_inverse(const cvec& in, cvec& out);

// 2D transform of a row-major rows x cols grid, same convention (inverse
// would carry 1/(rows*cols); only the forward direction is needed).
void dft2_forward(const std::vector<double>& grid, int rows, int cols, cvec& out);

} // namespace onode
