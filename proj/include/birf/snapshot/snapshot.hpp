#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "birf/field/field.hpp"
#include "birf/render/render.hpp"

namespace birf::snapshot {

// .birf scene snapshot: a little-endian header (decodable on its own),
// the packed grid sign bits (3D levels ascending, then xy/xz/yz planes
// ascending, one PackedBits block per level), then the MLP weights
// (density head then color head, per layer weights then biases) at 32- or
// 16-bit precision. CRC-32 covers the payload bytes.
inline constexpr uint32_t kFormatVersion = 1;
inline constexpr uint32_t kFlagMlpFp16 = 1u << 0;

class MagicError : public FormatError {
public:
    using FormatError::FormatError;
};
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};
class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

struct SnapshotHeader {
    uint32_t version = kFormatVersion;
    uint32_t flags = 0;
    uint32_t feature_dim = 0;
    uint32_t pe_freqs = 0;
    uint32_t embedding_width = 0;
    uint32_t hidden_width = 0;
    float density_exp_clamp = 15.f;
    std::vector<std::pair<uint32_t, uint64_t>> levels_3d;  // (resolution, table_size)
    std::vector<std::pair<uint32_t, uint64_t>> levels_2d;
    float scale = 1.f;
    float offset[3] = {0.f, 0.f, 0.f};
    float background[3] = {1.f, 1.f, 1.f};
    uint64_t grid_payload_bytes = 0;
    uint64_t mlp_payload_bytes = 0;
    uint32_t checksum = 0;

    bool fp16() const { return flags & kFlagMlpFp16; }
    grid::GridConfig grid_config() const;
    field::FieldConfig field_config() const;
};

struct Snapshot {
    field::FieldModel model;  // grid latents restored as +-1
    render::SceneTransform transform;
    Rgb background;
    SnapshotHeader header;
};

uint64_t save(const field::FieldModel& model, const render::SceneTransform& transform,
              const Rgb& background, const std::filesystem::path& path, bool mlp_fp16 = false);

Snapshot load(const std::filesystem::path& path);

// Header + checksum verification only; the grid payload is streamed through
// the CRC but never decoded.
SnapshotHeader read_info(const std::filesystem::path& path, uint64_t* file_size = nullptr);

struct SizeReport {
    uint64_t header_bytes = 0;
    uint64_t grid_bits = 0;
    uint64_t grid_bytes = 0;
    uint64_t mlp_params = 0;
    uint64_t mlp_bytes_fp32 = 0;
    uint64_t mlp_bytes_fp16 = 0;
    bool fp16 = false;

    uint64_t mlp_bytes() const { return fp16 ? mlp_bytes_fp16 : mlp_bytes_fp32; }
    uint64_t total_bytes() const { return header_bytes + grid_bytes + mlp_bytes(); }
    std::string to_text() const;
};

SizeReport report_size(const field::FieldModel& model, bool mlp_fp16 = false);
SizeReport report_size(const SnapshotHeader& header);

// IEEE half conversions used by the 16-bit weight mode.
uint16_t float_to_half(float v);
float half_to_float(uint16_t h);

}  // namespace birf::snapshot
