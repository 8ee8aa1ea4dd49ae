#include <CLI11.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "esl/cryoem.hpp"
#include "esl/error.hpp"
#include "esl/esl.hpp"
#include "esl/io.hpp"
#include "esl/metrics.hpp"
#include "esl/refine.hpp"
#include "esl/sampling.hpp"

namespace fs = std::filesystem;
using namespace esl;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optics and grid shared by the commands that consume images.
struct OpticsArgs {
    std::optional<double> defocus_um, cs_mm, wavenumber, voltage_kv, amp_contrast, voxel_size;
    std::string params;

    void add(CLI::App* c, bool with_params) {
        c->add_option("--defocus-um", defocus_um, "defocus in micrometres (default 1.5)");
        c->add_option("--cs-mm", cs_mm, "spherical aberration in millimetres (default 2)");
        c->add_option("--wavenumber-invnm", wavenumber, "electron wavenumber in nm^-1 (default 0.25)");
        c->add_option("--voltage-kv", voltage_kv, "derive the wavenumber from the acceleration voltage");
        c->add_option("--amp-contrast", amp_contrast, "amplitude contrast ratio in (0,1) (default 0.1)");
        c->add_option("--voxel-size", voxel_size, "voxel/pixel size in nm (default: box of 91 x 0.21667 nm)");
        if (with_params) c->add_option("--params", params, "params.txt written by gen-data")->check(CLI::ExistingFile);
    }

    CtfParams ctf(const std::map<std::string, std::string>& kv) const {
        auto pick = [&](const std::optional<double>& flag, const char* key, double def) {
            if (flag) return *flag;
            if (auto it = kv.find(key); it != kv.end()) return std::stod(it->second);
            return def;
        };
        double k = pick(wavenumber, "wavenumber_invnm", 0.25);
        if (voltage_kv) k = CtfParams::wavenumber_for_voltage(*voltage_kv);
        const double a = pick(amp_contrast, "amp_contrast", 0.1);
        if (!(a > 0.0 && a < 1.0)) throw UsageError("--amp-contrast must lie in (0,1)");
        if (!(k > 0.0)) throw UsageError("wavenumber must be > 0");
        return CtfParams::from_microscope(pick(defocus_um, "defocus_um", 1.5), pick(cs_mm, "cs_mm", 2.0), k, a);
    }

    double voxel(const std::map<std::string, std::string>& kv, int n) const {
        if (voxel_size) return *voxel_size;
        if (auto it = kv.find("voxel_size_nm"); it != kv.end()) return std::stod(it->second);
        return default_voxel_size(n);
    }

    std::map<std::string, std::string> load() const {
        return params.empty() ? std::map<std::string, std::string>{} : io::read_key_values(params);
    }
};

std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

// defaults < config file < flags: fill options not given on the command line.
void apply_config(CLI::App& app, const std::string& file) {
    if (file.empty()) return;
    const auto kv = io::read_key_values(file);
    CLI::App* sub = nullptr;
    for (CLI::App* s : app.get_subcommands()) sub = s;
    if (!sub) return;
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = nullptr;
        try {
            opt = sub->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
        }
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

void check_positive(double v, const char* what) {
    if (!(v > 0.0)) throw UsageError(std::string(what) + " must be > 0");
}

void check_eta(double eta) {
    if (!(eta > 0.0 && eta < 2.0)) throw UsageError("--eta must lie in (0,2)");
}

std::vector<Rotation> samples(int level) {
    if (level < 0) throw UsageError("--mesh-level must be >= 0");
    return so3_mesh(level).points;
}

void write_eval(const fs::path& dir, const std::vector<Rotation>& est, const std::vector<Rotation>& gt) {
    const AlignmentResult al = align_rotations(est, gt);
    fs::create_directories(dir);
    std::ofstream e(dir / "errors.csv");
    e << "index,err_deg,phi_err_deg,theta_err_deg,psi_err_deg\n" << std::setprecision(10);
    auto wrap = [](double a) { return std::abs(std::remainder(a, 2.0 * std::numbers::pi)); };
    for (size_t i = 0; i < est.size(); ++i) {
        const EulerZyz a = euler_zyz(al.apply(est[i])), b = euler_zyz(gt[i]);
        e << i << ',' << rad2deg(al.aligned_errors[i]) << ',' << rad2deg(wrap(a.phi - b.phi)) << ','
          << rad2deg(std::abs(a.theta - b.theta)) << ',' << rad2deg(wrap(a.psi - b.psi)) << '\n';
    }
    io::write_key_values(dir / "summary.txt", {{"count", std::to_string(est.size())},
                                               {"mean_err_deg", fmt(rad2deg(al.mean))},
                                               {"std_err_deg", fmt(rad2deg(al.std))},
                                               {"reflected", al.reflected ? "1" : "0"}});
    std::cout << "mean error " << rad2deg(al.mean) << " deg, std " << rad2deg(al.std) << " deg"
              << (al.reflected ? " (mirrored gauge)" : "") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ellipsoidal support lifting and cryo-EM rotation refinement"};
    app.require_subcommand(1);
    std::string config;
    int threads = omp_get_num_procs();
    app.add_option("--config", config, "key=value file; flags override it")->check(CLI::ExistingFile);
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    // phantom
    auto* ph = app.add_subcommand("phantom", "write the synthetic test density");
    int ph_n = 64;
    std::uint64_t ph_seed = 7;
    double ph_blur = 0.0;
    std::string ph_out;
    ph->add_option("--size", ph_n, "grid size n")->check(CLI::Range(8, 512));
    ph->add_option("--seed", ph_seed);
    ph->add_option("--blur-sigma", ph_blur, "Gaussian blur in voxels applied afterwards");
    ph->add_option("--out", ph_out)->required();

    // gen-data
    auto* gd = app.add_subcommand("gen-data", "simulate noisy projection images");
    std::string gd_volume, gd_out;
    int gd_count = 2048;
    double gd_snr = 1.0 / 16.0;
    std::uint64_t gd_seed = 0;
    OpticsArgs gd_optics;
    gd->add_option("--volume", gd_volume)->required()->check(CLI::ExistingFile);
    gd->add_option("--num-images", gd_count)->check(CLI::PositiveNumber);
    gd->add_option("--snr", gd_snr);
    gd->add_option("--seed", gd_seed);
    gd->add_option("--out-dir", gd_out)->required();
    gd_optics.add(gd, false);

    // estimate-rotations
    auto* er = app.add_subcommand("estimate-rotations", "one ESL rotation update against a fixed map");
    std::string er_volume, er_images, er_rot, er_weights, er_metrics, er_gt;
    int er_level = 1;
    double er_eta = 0.66, er_j0 = 15.0;
    std::optional<double> er_gamma;
    OpticsArgs er_optics;
    er->add_option("--volume", er_volume)->required()->check(CLI::ExistingFile);
    er->add_option("--images", er_images)->required()->check(CLI::ExistingFile);
    er->add_option("--mesh-level", er_level);
    er->add_option("--eta", er_eta);
    er->add_option("--j0", er_j0);
    er->add_option("--gamma", er_gamma, "fixed gamma per pixel; default estimates it per image");
    er->add_option("--out-rotations", er_rot)->required();
    er->add_option("--out-weights", er_weights);
    er->add_option("--out-metrics", er_metrics);
    er->add_option("--gt-rotations", er_gt)->check(CLI::ExistingFile);
    er_optics.add(er, true);

    // refine
    auto* rf = app.add_subcommand("refine", "alternating rotation / map refinement");
    std::string rf_images, rf_init, rf_out, rf_gt;
    int rf_level = 1, rf_iters = 10;
    double rf_eta = 0.66, rf_j0 = 15.0;
    std::optional<double> rf_gamma;
    OpticsArgs rf_optics;
    rf->add_option("--images", rf_images)->required()->check(CLI::ExistingFile);
    rf->add_option("--init-volume", rf_init)->required()->check(CLI::ExistingFile);
    rf->add_option("--mesh-level", rf_level);
    rf->add_option("--eta", rf_eta);
    rf->add_option("--j0", rf_j0);
    rf->add_option("--gamma", rf_gamma, "fixed gamma per pixel");
    rf->add_option("--iters", rf_iters)->check(CLI::PositiveNumber);
    rf->add_option("--out-dir", rf_out)->required();
    rf->add_option("--gt-rotations", rf_gt)->check(CLI::ExistingFile);
    rf_optics.add(rf, true);

    // lds-check
    auto* ld = app.add_subcommand("lds-check", "local discrepancy of the interval sequence");
    double ld_eta = 0.5, ld_b = 1.0, ld_a = 1.0;
    int ld_levels = 5;
    std::string ld_out;
    ld->add_option("--eta", ld_eta);
    ld->add_option("--b", ld_b);
    ld->add_option("--a", ld_a, "scale of the quadratic form");
    ld->add_option("--levels", ld_levels)->check(CLI::Range(1, 12));
    ld->add_option("--out", ld_out)->required();

    // so3-mesh
    auto* sm = app.add_subcommand("so3-mesh", "write a refined SO(3) sampling set");
    int sm_level = 0;
    std::string sm_out;
    sm->add_option("--level", sm_level)->check(CLI::Range(0, 3));
    sm->add_option("--out", sm_out)->required();

    // eval
    auto* ev = app.add_subcommand("eval", "aligned rotation errors against ground truth");
    std::string ev_est, ev_gt, ev_out;
    ev->add_option("--est", ev_est)->required()->check(CLI::ExistingFile);
    ev->add_option("--gt", ev_gt)->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "output directory")->required();

    try {
        app.parse(argc, argv);
        apply_config(app, config);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    omp_set_num_threads(threads);

    try {
        if (*ph) {
            Volume v = make_phantom(ph_n, ph_seed);
            if (ph_blur > 0.0) v = blur_volume(v, ph_blur);
            io::write_volume(ph_out, v);
            std::cout << "wrote " << ph_out << " (" << ph_n << "^3, voxel " << v.voxel_size << " nm)\n";
        } else if (*gd) {
            check_positive(gd_snr, "--snr");
            const io::Tensor t = io::read_eslt(gd_volume);
            if (t.dims.size() != 3 || t.dims[0] != t.dims[1] || t.dims[1] != t.dims[2])
                throw UsageError("--volume must be a cubic rank-3 tensor");
            const int n = static_cast<int>(t.dims[0]);
            const double h = gd_optics.voxel({}, n);
            const CtfParams p = gd_optics.ctf({});
            const Volume v = io::read_volume(gd_volume, h);
            const Dataset ds = generate_dataset(v, gd_count, gd_snr, p, gd_seed);
            fs::create_directories(gd_out);
            io::write_images(fs::path(gd_out) / "images.eslt", ds.images);
            io::write_rotations(fs::path(gd_out) / "gt_rotations.csv", ds.gt_rotations);
            io::write_key_values(fs::path(gd_out) / "params.txt",
                                 {{"n", std::to_string(n)},
                                  {"num_images", std::to_string(gd_count)},
                                  {"voxel_size_nm", fmt(h)},
                                  {"snr", fmt(gd_snr)},
                                  {"seed", std::to_string(gd_seed)},
                                  {"defocus_um", fmt(p.defocus_nm * 1e-3)},
                                  {"cs_mm", fmt(p.cs_nm * 1e-6)},
                                  {"wavenumber_invnm", fmt(p.wavenumber)},
                                  {"amp_contrast", fmt(p.amp_contrast)},
                                  {"noise_variance", fmt(ds.noise_variance)},
                                  {"clean_power", fmt(ds.clean_power)}});
            std::cout << "wrote " << gd_count << " images of " << n << "x" << n << " to " << gd_out << '\n';
        } else if (*er) {
            check_eta(er_eta);
            check_positive(er_j0, "--j0");
            if (er_gamma) check_positive(*er_gamma, "--gamma");
            const auto kv = er_optics.load();
            const io::Tensor it = io::read_eslt(er_images);
            if (it.dims.size() != 3 || it.dims[1] != it.dims[2]) throw UsageError("--images must be count x n x n");
            const double h = er_optics.voxel(kv, static_cast<int>(it.dims[1]));
            const CtfParams p = er_optics.ctf(kv);
            const ImageStack images = io::read_images(er_images, h);
            const Volume v = io::read_volume(er_volume, h);
            if (v.n != images.n) throw UsageError("volume and image sizes differ");
            std::vector<Rotation> gt;
            if (!er_gt.empty()) {
                gt = io::read_rotations(er_gt);
                if (gt.size() != static_cast<size_t>(images.count))
                    throw UsageError("--gt-rotations has a different length than --images");
            }
            const auto X = samples(er_level);
            const NoiseParams np = default_parameters(images, v);
            const LossMatrix L = rotation_losses(v, images, X, p, np.sigma);
            EslConfig cfg;
            cfg.eta = er_eta;
            cfg.j0 = er_j0;
            cfg.gamma = er_gamma;
            const RotationUpdate u = update_rotations(L, X, cfg, static_cast<double>(images.pixels()));
            io::write_rotations(er_rot, u.rotations);
            if (!er_weights.empty()) io::write_weights(er_weights, u.weights);

            IterationMetrics m;
            m.iter = 1;
            std::vector<double> l0, w2;
            for (const auto& w : u.weights) l0.push_back(w.support_size());
            m.mean_l0 = mean_of(l0);
            m.mean_gamma = mean_of(u.gammas);
            if (!gt.empty()) {
                const AlignmentResult al = align_rotations(u.rotations, gt);
                m.mean_err_deg = rad2deg(al.mean);
                m.std_err_deg = rad2deg(al.std);
                for (size_t i = 0; i < u.weights.size(); ++i) {
                    double s = 0.0;
                    const auto& w = u.weights[i];
                    for (size_t q = 0; q < w.index.size(); ++q) {
                        const double d = so3_distance(al.apply(X[static_cast<size_t>(w.index[q])]), gt[i]);
                        s += w.weight[q] * d * d;
                    }
                    w2.push_back(std::sqrt(s));
                }
                const AlignmentResult am = align_rotations(u.argmax_points, gt);
                std::cout << "mean error " << m.mean_err_deg << " deg (largest-weight point " << rad2deg(am.mean)
                          << " deg)\n";
            } else {
                for (size_t i = 0; i < u.weights.size(); ++i)
                    w2.push_back(w2_to_dirac<So3>(X, u.weights[i], u.rotations[i]));
            }
            m.mean_w2_deg = rad2deg(mean_of(w2));
            VolumeProblem P{&images, &u.rotations, p, np.sigma, np.tau1, np.tau2};
            m.objective = volume_objective(P, v);
            if (!er_metrics.empty()) {
                io::write_metrics_header(er_metrics);
                io::append_metrics(er_metrics, m);
            }
            std::cout << images.count << " images, " << X.size() << " samples, mean support " << m.mean_l0
                      << ", mean gamma " << m.mean_gamma << '\n';
            if (u.restricted) std::cout << u.restricted << " supports cut to the convexity ball\n";
        } else if (*rf) {
            check_eta(rf_eta);
            check_positive(rf_j0, "--j0");
            if (rf_gamma) check_positive(*rf_gamma, "--gamma");
            const auto kv = rf_optics.load();
            const io::Tensor it = io::read_eslt(rf_images);
            if (it.dims.size() != 3 || it.dims[1] != it.dims[2]) throw UsageError("--images must be count x n x n");
            const double h = rf_optics.voxel(kv, static_cast<int>(it.dims[1]));
            const CtfParams p = rf_optics.ctf(kv);
            const ImageStack images = io::read_images(rf_images, h);
            const Volume v0 = io::read_volume(rf_init, h);
            if (v0.n != images.n) throw UsageError("volume and image sizes differ");
            std::vector<Rotation> gt;
            if (!rf_gt.empty()) {
                gt = io::read_rotations(rf_gt);
                if (gt.size() != static_cast<size_t>(images.count))
                    throw UsageError("--gt-rotations has a different length than --images");
            }
            const auto X = samples(rf_level);
            RefinementConfig cfg;
            cfg.eta = rf_eta;
            cfg.j0 = rf_j0;
            cfg.gamma = rf_gamma;
            cfg.outer_iters = rf_iters;
            cfg.sampling_level = rf_level;
            const fs::path out(rf_out);
            fs::create_directories(out);
            const fs::path metrics = out / "metrics.csv";
            io::write_metrics_header(metrics);
            // Every iteration is flushed as it completes, so an abort keeps the last state.
            joint_refine(images, v0, p, cfg, X, gt.empty() ? nullptr : &gt, [&](const RefinementState& st) {
                const std::string k = std::to_string(st.iteration);
                io::write_volume(out / ("volume_" + k + ".eslt"), st.volume);
                io::write_rotations(out / ("rotations_" + k + ".csv"), st.rotations);
                io::write_weights(out / ("weights_" + k + ".csv"), st.weights);
                io::append_metrics(metrics, st.log.back());
                const auto& m = st.log.back();
                std::cout << "iter " << st.iteration << ": support " << m.mean_l0 << ", gamma " << m.mean_gamma;
                if (!gt.empty()) std::cout << ", error " << m.mean_err_deg << " deg";
                std::cout << std::endl;
            });
        } else if (*ld) {
            check_eta(ld_eta);
            check_positive(ld_b, "--b");
            check_positive(ld_a, "--a");
            const auto sizes = interval_lds_sizes(ld_eta, ld_b, ld_levels);
            std::ofstream o(ld_out);
            if (!o) throw EslError(ErrorCode::Io, "cannot write " + ld_out);
            o << "level,M,radius,count_gap,quad_gap,count_scaled,quad_scaled\n" << std::setprecision(12);
            std::vector<double> cs, qs;
            for (int m = 1; m <= ld_levels; ++m) {
                const auto& M = sizes[static_cast<size_t>(m - 1)];
                const DiscrepancyReport r = interval_grid_discrepancy(M, ld_eta, ld_b, ld_a, true);
                const double Md = std::stod(M);
                const double c = r.count_gap * std::pow(Md, (1.0 + ld_eta) / 3.0);
                const double q = r.quad_gap * std::pow(Md, 1.0 + ld_eta);
                o << m << ',' << M << ',' << r.radius << ',' << r.count_gap << ',' << r.quad_gap << ',' << c << ',' << q
                  << '\n';
                if (m >= 2) {
                    cs.push_back(c);
                    qs.push_back(q);
                }
            }
            bool ok = true;
            for (size_t i = 1; i < cs.size(); ++i) ok = ok && cs[i] < cs[i - 1] && qs[i] < qs[i - 1];
            std::cout << "scaled gaps " << (ok ? "strictly decrease" : "do NOT strictly decrease")
                      << " from level 2 on\n";
            return ok ? 0 : 1;
        } else if (*sm) {
            const auto S = so3_mesh(sm_level);
            io::write_rotations(sm_out, S.points);
            const SpacingStats st = spacing_stats(nearest_neighbour_distances(S.points));
            std::cout << S.size() << " rotations; nearest-neighbour angle mean " << rad2deg(st.mean) << " deg, min "
                      << rad2deg(st.min) << ", max " << rad2deg(st.max) << ", cv " << st.cv() << '\n';
        } else if (*ev) {
            const auto est = io::read_rotations(ev_est), gt = io::read_rotations(ev_gt);
            if (est.size() != gt.size()) throw UsageError("--est and --gt differ in length");
            if (est.empty()) throw UsageError("no rotations to evaluate");
            write_eval(ev_out, est, gt);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const EslError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::MissingAsset || e.code() == ErrorCode::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
