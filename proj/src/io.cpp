#include "esl/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "esl/error.hpp"

namespace esl::io {

namespace {

static_assert(std::endian::native == std::endian::little, "ESLT I/O assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& f, bool append = false) {
    std::ofstream out(f, append ? std::ios::app : (std::ios::out | std::ios::trunc));
    if (!out) throw EslError(ErrorCode::Io, "cannot write " + f.string());
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void write_eslt(const std::filesystem::path& file, const Tensor& t) {
    size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) throw EslError(ErrorCode::InvalidArgument, "tensor dims do not match payload");
    if (t.dims.size() > 255) throw EslError(ErrorCode::InvalidArgument, "rank too large");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw EslError(ErrorCode::Io, "cannot write " + file.string());
    const unsigned char head[8] = {'E', 'S', 'L', 'T', 1, 1, static_cast<unsigned char>(t.dims.size()), 0};
    out.write(reinterpret_cast<const char*>(head), 8);
    out.write(reinterpret_cast<const char*>(t.dims.data()), static_cast<std::streamsize>(t.dims.size() * 4));
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
    if (!out) throw EslError(ErrorCode::Io, "short write to " + file.string());
}

Tensor read_eslt(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw EslError(ErrorCode::Io, "cannot open " + file.string());
    unsigned char head[8];
    if (!in.read(reinterpret_cast<char*>(head), 8) || std::memcmp(head, "ESLT", 4) != 0)
        throw EslError(ErrorCode::Io, "not an ESLT file: " + file.string());
    if (head[4] != 1 || head[5] != 1 || head[7] != 0)
        throw EslError(ErrorCode::Io, "unsupported ESLT version/dtype in " + file.string());
    Tensor t;
    t.dims.resize(head[6]);
    if (!in.read(reinterpret_cast<char*>(t.dims.data()), static_cast<std::streamsize>(t.dims.size() * 4)))
        throw EslError(ErrorCode::Io, "truncated ESLT header");
    size_t count = 1;
    for (auto d : t.dims) count *= d;
    t.values.resize(count);
    if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(count * 4)))
        throw EslError(ErrorCode::Io, "truncated ESLT payload");
    if (in.peek() != std::char_traits<char>::eof()) throw EslError(ErrorCode::Io, "trailing bytes in ESLT file");
    return t;
}

void write_volume(const std::filesystem::path& file, const Volume& v) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(v.n), static_cast<std::uint32_t>(v.n), static_cast<std::uint32_t>(v.n)};
    t.values.assign(v.data.begin(), v.data.end());
    write_eslt(file, t);
}

Volume read_volume(const std::filesystem::path& file, double voxel_size) {
    const Tensor t = read_eslt(file);
    if (t.dims.size() != 3 || t.dims[0] != t.dims[1] || t.dims[1] != t.dims[2] || t.dims[0] < 2)
        throw EslError(ErrorCode::InvalidArgument, "volume must be a cubic rank-3 tensor");
    Volume v(static_cast<int>(t.dims[0]), voxel_size);
    v.data.assign(t.values.begin(), t.values.end());
    for (double x : v.data)
        if (!std::isfinite(x)) throw EslError(ErrorCode::NonFinite, "volume entries");
    return v;
}

void write_images(const std::filesystem::path& file, const ImageStack& s) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(s.count), static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.n)};
    t.values.assign(s.data.begin(), s.data.end());
    write_eslt(file, t);
}

ImageStack read_images(const std::filesystem::path& file, double pixel_size) {
    const Tensor t = read_eslt(file);
    if (t.dims.size() != 3 || t.dims[1] != t.dims[2])
        throw EslError(ErrorCode::InvalidArgument, "image stack must be rank 3 with square images");
    ImageStack s(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), pixel_size);
    s.data.assign(t.values.begin(), t.values.end());
    return s;
}

void write_rotations(const std::filesystem::path& file, const std::vector<Rotation>& rs) {
    auto out = open_out(file);
    out << "index,qw,qx,qy,qz\n" << std::setprecision(17);
    for (size_t i = 0; i < rs.size(); ++i)
        out << i << ',' << rs[i].w() << ',' << rs[i].x() << ',' << rs[i].y() << ',' << rs[i].z() << '\n';
}

std::vector<Rotation> read_rotations(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw EslError(ErrorCode::Io, "cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "index,qw,qx,qy,qz")
        throw EslError(ErrorCode::Io, "bad rotations header in " + file.string());
    std::vector<Rotation> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 5) throw EslError(ErrorCode::Io, "bad rotations row: " + line);
        const Eigen::Vector4d q(v[1], v[2], v[3], v[4]);
        if (std::abs(q.norm() - 1.0) > 1e-9) throw EslError(ErrorCode::Io, "non-unit quaternion: " + line);
        out.emplace_back(q);
    }
    return out;
}

void write_weights(const std::filesystem::path& file, const std::vector<LiftedWeights>& w) {
    auto out = open_out(file);
    out << "image_index,sample_index,weight\n" << std::setprecision(17);
    for (size_t i = 0; i < w.size(); ++i)
        for (size_t k = 0; k < w[i].index.size(); ++k) out << i << ',' << w[i].index[k] << ',' << w[i].weight[k] << '\n';
}

void write_metrics_header(const std::filesystem::path& file) { open_out(file) << kMetricsHeader << '\n'; }

void append_metrics(const std::filesystem::path& file, const IterationMetrics& m) {
    auto out = open_out(file, true);
    out << std::setprecision(10) << m.iter << ',' << m.mean_err_deg << ',' << m.std_err_deg << ',' << m.mean_l0 << ','
        << m.mean_w2_deg << ',' << m.mean_gamma << ',' << m.objective << '\n';
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw EslError(ErrorCode::Io, "cannot open " + file.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw EslError(ErrorCode::InvalidArgument, "expected key=value: " + line);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void write_key_values(const std::filesystem::path& file, const std::map<std::string, std::string>& kv) {
    auto out = open_out(file);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

}  // namespace esl::io
