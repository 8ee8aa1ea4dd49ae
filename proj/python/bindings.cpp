#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "esl/cryoem.hpp"
#include "esl/esl.hpp"
#include "esl/metrics.hpp"
#include "esl/refine.hpp"
#include "esl/sampling.hpp"
#include "esl/simplex.hpp"

namespace py = pybind11;
using namespace esl;

namespace {

using QuatArray = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

QuatArray to_array(const std::vector<Rotation>& r) {
    QuatArray a(static_cast<Eigen::Index>(r.size()), 4);
    for (size_t i = 0; i < r.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = r[i].q().transpose();
    return a;
}

std::vector<Rotation> from_array(const QuatArray& a) {
    std::vector<Rotation> r;
    r.reserve(static_cast<size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) r.emplace_back(Eigen::Vector4d(a.row(i).transpose()));
    return r;
}

py::array_t<double> volume_array(const Volume& v) {
    py::array_t<double> a({v.n, v.n, v.n});
    std::copy(v.data.begin(), v.data.end(), a.mutable_data());
    return a;
}

Volume array_volume(py::array_t<double, py::array::c_style | py::array::forcecast> a, double h) {
    if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2))
        throw EslError(ErrorCode::InvalidArgument, "expected an n x n x n array");
    Volume v(static_cast<int>(a.shape(0)), h);
    std::copy(a.data(), a.data() + v.size(), v.data.begin());
    return v;
}

ImageStack array_images(py::array_t<double, py::array::c_style | py::array::forcecast> a, double h) {
    if (a.ndim() != 3 || a.shape(1) != a.shape(2)) throw EslError(ErrorCode::InvalidArgument, "expected count x n x n");
    ImageStack s(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), h);
    std::copy(a.data(), a.data() + s.data.size(), s.data.begin());
    return s;
}

py::dict weights_dict(const LiftedWeights& w) {
    py::dict d;
    d["index"] = w.index;
    d["weight"] = w.weight;
    d["n_total"] = w.n_total;
    return d;
}

}  // namespace

PYBIND11_MODULE(eslift, m) {
    m.doc() = "Energy-scaled lifting for manifold-valued minimisation and cryo-EM rotation estimation";

    py::register_exception<EslError>(m, "EslError", PyExc_ValueError);

    m.def("so3_exp", [](const Eigen::Vector4d& p, const Eigen::Vector3d& v) { return so3_exp(Rotation(p), v).q(); },
          py::arg("base"), py::arg("tangent"));
    m.def("so3_log", [](const Eigen::Vector4d& p, const Eigen::Vector4d& q) { return so3_log(Rotation(p), Rotation(q)); },
          py::arg("base"), py::arg("target"));
    m.def("so3_distance", [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) { return so3_distance(Rotation(a), Rotation(b)); });
    m.def("quat_to_matrix", [](const Eigen::Vector4d& q) { return Rotation(q).matrix(); });
    m.def("matrix_to_quat", [](const Eigen::Matrix3d& R) { return Rotation::from_matrix(R).q(); });

    m.def("project_simplex", [](const Eigen::VectorXd& e) {
        const auto r = project_simplex(e);
        return py::make_tuple(r.weights, r.cutoff);
    });
    m.def("lifted_weights", [](const Eigen::VectorXd& f, double gamma, double eta) {
        return weights_dict(lifted_weights(f, gamma, eta));
    });
    m.def("estimate_gamma", &estimate_gamma, py::arg("losses"), py::arg("j0"), py::arg("eta"), py::arg("dim"));
    m.def("sparsity_bounds", [](int n, double j0, double eta, int dim) {
        const auto b = sparsity_bounds(n, j0, eta, dim);
        return py::make_tuple(b.lower, b.upper);
    });
    m.def(
        "esl_minimise_so3",
        [](const Eigen::VectorXd& f, const QuatArray& pts, double eta, double j0, std::optional<double> gamma) {
            EslConfig cfg;
            cfg.eta = eta;
            cfg.j0 = j0;
            cfg.gamma = gamma;
            const auto r = esl_minimise<So3>(f, from_array(pts), cfg);
            py::dict d;
            d["barycentre"] = r.barycentre.q();
            d["init_point"] = r.init_point.q();
            d["gamma"] = r.gamma_used;
            d["weights"] = weights_dict(r.weights);
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("losses"), py::arg("points"), py::arg("eta") = 0.66, py::arg("j0") = 15.0,
        py::arg("gamma") = py::none());

    m.def("so3_mesh", [](int level) { return to_array(so3_mesh(level).points); }, py::arg("level"));
    m.def("interval_lds", [](double eta, double b, int m_) { return interval_lds(eta, b, m_).points; });

    m.def("make_phantom", [](int n, std::uint64_t seed) { return volume_array(make_phantom(n, seed)); },
          py::arg("n"), py::arg("seed") = 7);
    m.def("default_voxel_size", &default_voxel_size);
    m.def("wavenumber_for_voltage", &CtfParams::wavenumber_for_voltage);
    m.def(
        "project",
        [](py::array_t<double> vol, double h, const Eigen::Vector4d& q) {
            const auto img = project_rotated(array_volume(vol, h), Rotation(q));
            const auto n = static_cast<py::ssize_t>(std::lround(std::sqrt(static_cast<double>(img.size()))));
            py::array_t<double> a({n, n});
            std::copy(img.begin(), img.end(), a.mutable_data());
            return a;
        },
        py::arg("volume"), py::arg("voxel_size"), py::arg("rotation"));
    m.def(
        "generate_dataset",
        [](py::array_t<double> vol, double h, int count, double snr, std::uint64_t seed, double defocus_um, double cs_mm,
           double wavenumber, double amp_contrast) {
            const auto p = CtfParams::from_microscope(defocus_um, cs_mm, wavenumber, amp_contrast);
            const auto ds = generate_dataset(array_volume(vol, h), count, snr, p, seed);
            py::array_t<double> imgs({ds.images.count, ds.images.n, ds.images.n});
            std::copy(ds.images.data.begin(), ds.images.data.end(), imgs.mutable_data());
            return py::make_tuple(imgs, to_array(ds.gt_rotations), ds.noise_variance);
        },
        py::arg("volume"), py::arg("voxel_size"), py::arg("count"), py::arg("snr") = 1.0 / 16.0, py::arg("seed") = 0,
        py::arg("defocus_um") = 1.5, py::arg("cs_mm") = 2.0, py::arg("wavenumber") = 0.25,
        py::arg("amp_contrast") = 0.1);
    m.def(
        "rotation_losses",
        [](py::array_t<double> vol, py::array_t<double> images, double h, const QuatArray& X, double sigma,
           double defocus_um, double cs_mm, double wavenumber, double amp_contrast) {
            const auto p = CtfParams::from_microscope(defocus_um, cs_mm, wavenumber, amp_contrast);
            return LossMatrix(rotation_losses(array_volume(vol, h), array_images(images, h), from_array(X), p, sigma));
        },
        py::arg("volume"), py::arg("images"), py::arg("voxel_size"), py::arg("points"), py::arg("sigma"),
        py::arg("defocus_um") = 1.5, py::arg("cs_mm") = 2.0, py::arg("wavenumber") = 0.25,
        py::arg("amp_contrast") = 0.1);
    m.def(
        "update_rotations",
        [](const LossMatrix& L, const QuatArray& X, double eta, double j0, std::optional<double> gamma,
           double gamma_unit) {
            EslConfig cfg;
            cfg.eta = eta;
            cfg.j0 = j0;
            cfg.gamma = gamma;
            const auto u = update_rotations(L, from_array(X), cfg, gamma_unit);
            std::vector<int> l0;
            for (const auto& w : u.weights) l0.push_back(w.support_size());
            return py::make_tuple(to_array(u.rotations), to_array(u.argmax_points), l0, u.gammas);
        },
        py::arg("losses"), py::arg("points"), py::arg("eta") = 0.66, py::arg("j0") = 15.0,
        py::arg("gamma") = py::none(), py::arg("gamma_unit") = 1.0);
    m.def(
        "align_rotations",
        [](const QuatArray& est, const QuatArray& gt) {
            const auto a = align_rotations(from_array(est), from_array(gt));
            return py::make_tuple(a.aligned_errors, a.mean, a.std, a.reflected);
        },
        py::arg("estimated"), py::arg("ground_truth"));
    m.def("euler_zyz", [](const Eigen::Vector4d& q) {
        const auto e = euler_zyz(Rotation(q));
        return py::make_tuple(e.phi, e.theta, e.psi);
    });
}
