#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "esl/cryoem.hpp"
#include "esl/esl.hpp"
#include "esl/manifold.hpp"
#include "esl/refine.hpp"

namespace esl::io {

// ESLT: "ESLT", u8 version = 1, u8 dtype = 1 (f32 LE), u8 rank, u8 reserved = 0,
// rank x u32 LE dims, row-major payload.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

void write_eslt(const std::filesystem::path& file, const Tensor& t);
Tensor read_eslt(const std::filesystem::path& file);

void write_volume(const std::filesystem::path& file, const Volume& v);
// voxel size is not stored in the tensor; the caller supplies it.
Volume read_volume(const std::filesystem::path& file, double voxel_size);
void write_images(const std::filesystem::path& file, const ImageStack& s);
ImageStack read_images(const std::filesystem::path& file, double pixel_size);

// index,qw,qx,qy,qz with 17 significant digits.
void write_rotations(const std::filesystem::path& file, const std::vector<Rotation>& r);
std::vector<Rotation> read_rotations(const std::filesystem::path& file);

// image_index,sample_index,weight
void write_weights(const std::filesystem::path& file, const std::vector<LiftedWeights>& w);

inline constexpr const char* kMetricsHeader = "iter,mean_err_deg,std_err_deg,mean_l0,mean_w2_deg,mean_gamma,objective";
void write_metrics_header(const std::filesystem::path& file);
void append_metrics(const std::filesystem::path& file, const IterationMetrics& m);

// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& file);
void write_key_values(const std::filesystem::path& file, const std::map<std::string, std::string>& kv);

}  // namespace esl::io
