#include "esl/fft.hpp"

#include <fftw3.h>

#include <array>
#include <map>
#include <mutex>

#include "esl/error.hpp"

namespace esl::fft {

namespace {

enum Kind { R2C, C2R };

std::mutex g_mu;
std::map<std::array<int, 5>, fftw_plan> g_plans;

fftw_plan get_plan(Kind kind, int rank, int n0, int n1, int n2) {
    std::lock_guard<std::mutex> lock(g_mu);
    const std::array<int, 5> key{kind, rank, n0, n1, n2};
    auto it = g_plans.find(key);
    if (it != g_plans.end()) return it->second;
    const int dims[3] = {n0, n1, n2};
    size_t real_n = 1;
    for (int i = 0; i < rank; ++i) real_n *= static_cast<size_t>(dims[i]);
    const size_t cplx_n = real_n / static_cast<size_t>(dims[rank - 1]) * static_cast<size_t>(dims[rank - 1] / 2 + 1);
    double* r = fftw_alloc_real(real_n);
    fftw_complex* c = fftw_alloc_complex(cplx_n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan p = kind == R2C ? fftw_plan_dft_r2c(rank, dims, r, c, flags)
                              : fftw_plan_dft_c2r(rank, dims, c, r, flags | FFTW_DESTROY_INPUT);
    fftw_free(r);
    fftw_free(c);
    if (!p) throw EslError(ErrorCode::InvalidArgument, "FFTW plan creation failed");
    g_plans.emplace(key, p);
    return p;
}

void c2r(int rank, int n0, int n1, int n2, const cplx* in, double* out) {
    const int dims[3] = {n0, n1, n2};
    size_t real_n = 1;
    for (int i = 0; i < rank; ++i) real_n *= static_cast<size_t>(dims[i]);
    const size_t cplx_n = real_n / static_cast<size_t>(dims[rank - 1]) * static_cast<size_t>(dims[rank - 1] / 2 + 1);
    std::vector<cplx> tmp(in, in + cplx_n);  // c2r overwrites its input
    fftw_execute_dft_c2r(get_plan(C2R, rank, n0, n1, n2), reinterpret_cast<fftw_complex*>(tmp.data()), out);
}

}  // namespace

void r2c_2d(int n0, int n1, const double* in, cplx* out) {
    fftw_execute_dft_r2c(get_plan(R2C, 2, n0, n1, 0), const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void c2r_2d(int n0, int n1, const cplx* in, double* out) { c2r(2, n0, n1, 0, in, out); }

void r2c_3d(int n0, int n1, int n2, const double* in, cplx* out) {
    fftw_execute_dft_r2c(get_plan(R2C, 3, n0, n1, n2), const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void c2r_3d(int n0, int n1, int n2, const cplx* in, double* out) { c2r(3, n0, n1, n2, in, out); }

}  // namespace esl::fft
