#pragma once

#include <complex>
#include <vector>

namespace esl::fft {

using cplx = std::complex<double>;

// Unnormalised real-to-complex transforms (FFTW conventions, row-major, last
// axis halved). Plans are created once per shape and shared; execution is
// thread safe.
void r2c_2d(int n0, int n1, const double* in, cplx* out);
void c2r_2d(int n0, int n1, const cplx* in, double* out);  // destroys nothing; copies input
void r2c_3d(int n0, int n1, int n2, const double* in, cplx* out);
void c2r_3d(int n0, int n1, int n2, const cplx* in, double* out);

// Signed integer frequency of index k on an n-point axis.
inline int freq_index(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace esl::fft
