#include "birf/snapshot/snapshot.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "birf/binarize/binarize.hpp"

namespace birf::snapshot {

static_assert(std::endian::native == std::endian::little,
              "snapshot writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'I', 'R', 'F'};

struct Writer {
    std::vector<uint8_t> buf;

    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
};

struct Reader {
    std::istream& in;
    std::size_t consumed = 0;

    void bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError("snapshot truncated");
        consumed += n;
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
};

void write_mlp_spec(Writer& w, const nn::MlpSpec& s) {
    w.u32(static_cast<uint32_t>(s.input_width));
    w.u32(static_cast<uint32_t>(s.hidden_width));
    w.u32(static_cast<uint32_t>(s.hidden_layers));
    w.u32(static_cast<uint32_t>(s.output_width));
    w.u8(static_cast<uint8_t>(s.output_activation));
}

nn::MlpSpec read_mlp_spec(Reader& r) {
    nn::MlpSpec s;
    s.input_width = static_cast<int>(r.u32());
    s.hidden_width = static_cast<int>(r.u32());
    s.hidden_layers = static_cast<int>(r.u32());
    s.output_width = static_cast<int>(r.u32());
    s.output_activation = static_cast<nn::OutputActivation>(r.u8());
    return s;
}

std::vector<uint8_t> grid_payload(const field::FieldModel& model) {
    std::vector<uint8_t> out;
    for (const auto* t : model.grid().all_tensors()) {
        const auto packed = binarize::pack_latent_signs(t->latent);
        out.insert(out.end(), packed.bytes.begin(), packed.bytes.end());
    }
    return out;
}

void append_mlp_payload(std::vector<uint8_t>& out, const nn::Mlp& mlp, bool fp16) {
    const auto& values = mlp.params().values;
    if (fp16) {
        for (float v : values) {
            const uint16_t h = float_to_half(v);
            out.push_back(static_cast<uint8_t>(h & 0xff));
            out.push_back(static_cast<uint8_t>(h >> 8));
        }
    } else {
        const std::size_t off = out.size();
        out.resize(off + values.size() * 4);
        std::memcpy(out.data() + off, values.data(), values.size() * 4);
    }
}

SnapshotHeader build_header(const field::FieldModel& model, const render::SceneTransform& transform,
                            const Rgb& background, bool fp16) {
    SnapshotHeader h;
    h.flags = fp16 ? kFlagMlpFp16 : 0;
    const auto& gc = model.grid().config();
    h.feature_dim = static_cast<uint32_t>(gc.feature_dim);
    h.pe_freqs = static_cast<uint32_t>(model.config().pe_freqs);
    h.embedding_width = static_cast<uint32_t>(model.config().embedding_width);
    h.hidden_width = static_cast<uint32_t>(model.config().hidden_width);
    h.density_exp_clamp = model.config().density_exp_clamp;
    for (const auto& l : gc.levels_3d) h.levels_3d.push_back({static_cast<uint32_t>(l.resolution), l.table_size});
    for (const auto& l : gc.levels_2d) h.levels_2d.push_back({static_cast<uint32_t>(l.resolution), l.table_size});
    h.scale = transform.scale;
    h.offset[0] = transform.offset.x;
    h.offset[1] = transform.offset.y;
    h.offset[2] = transform.offset.z;
    h.background[0] = background.r;
    h.background[1] = background.g;
    h.background[2] = background.b;
    return h;
}

std::vector<uint8_t> encode_header(const SnapshotHeader& h, const nn::MlpSpec& dspec,
                                   const nn::MlpSpec& cspec) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(h.version);
    w.u32(h.flags);
    w.u32(h.feature_dim);
    w.u32(h.pe_freqs);
    w.u32(h.embedding_width);
    w.u32(h.hidden_width);
    w.f32(h.density_exp_clamp);
    write_mlp_spec(w, dspec);
    write_mlp_spec(w, cspec);
    w.u32(static_cast<uint32_t>(h.levels_3d.size()));
    for (const auto& [res, table] : h.levels_3d) {
        w.u32(res);
        w.u64(table);
    }
    w.u32(static_cast<uint32_t>(h.levels_2d.size()));
    for (const auto& [res, table] : h.levels_2d) {
        w.u32(res);
        w.u64(table);
    }
    w.f32(h.scale);
    for (float v : h.offset) w.f32(v);
    for (float v : h.background) w.f32(v);
    w.u64(h.grid_payload_bytes);
    w.u64(h.mlp_payload_bytes);
    w.u32(h.checksum);
    return std::move(w.buf);
}

}  // namespace

grid::GridConfig SnapshotHeader::grid_config() const {
    grid::GridConfig gc;
    gc.feature_dim = static_cast<int>(feature_dim);
    for (const auto& [res, table] : levels_3d)
        gc.levels_3d.push_back({3, static_cast<int>(res), table, gc.feature_dim});
    for (const auto& [res, table] : levels_2d)
        gc.levels_2d.push_back({2, static_cast<int>(res), table, gc.feature_dim});
    return gc;
}

field::FieldConfig SnapshotHeader::field_config() const {
    field::FieldConfig fc;
    fc.pe_freqs = static_cast<int>(pe_freqs);
    fc.embedding_width = static_cast<int>(embedding_width);
    fc.hidden_width = static_cast<int>(hidden_width);
    fc.density_exp_clamp = density_exp_clamp;
    return fc;
}

uint64_t save(const field::FieldModel& model, const render::SceneTransform& transform,
              const Rgb& background, const std::filesystem::path& path, bool mlp_fp16) {
    SnapshotHeader h = build_header(model, transform, background, mlp_fp16);

    std::vector<uint8_t> payload = grid_payload(model);
    h.grid_payload_bytes = payload.size();
    append_mlp_payload(payload, model.density_mlp(), mlp_fp16);
    append_mlp_payload(payload, model.color_mlp(), mlp_fp16);
    h.mlp_payload_bytes = payload.size() - h.grid_payload_bytes;
    h.checksum = static_cast<uint32_t>(
        crc32(0L, payload.data(), static_cast<uInt>(payload.size())));

    const auto header_bytes = encode_header(h, model.density_mlp().spec(), model.color_mlp().spec());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open snapshot for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(header_bytes.data()), header_bytes.size());
    out.write(reinterpret_cast<const char*>(payload.data()), payload.size());
    if (!out) throw IoError("short write to snapshot: " + path.string());
    return header_bytes.size() + payload.size();
}

namespace {

struct ParsedHeader {
    SnapshotHeader h;
    nn::MlpSpec dspec, cspec;
    std::size_t header_bytes = 0;
};

ParsedHeader parse_header(std::istream& in, const std::string& what) {
    Reader r{in};
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw MagicError("bad magic in " + what + " (not a .birf snapshot)");
    ParsedHeader p;
    p.h.version = r.u32();
    if (p.h.version != kFormatVersion)
        throw VersionError("snapshot version mismatch: found " + std::to_string(p.h.version) +
                           ", expected " + std::to_string(kFormatVersion));
    p.h.flags = r.u32();
    p.h.feature_dim = r.u32();
    p.h.pe_freqs = r.u32();
    p.h.embedding_width = r.u32();
    p.h.hidden_width = r.u32();
    p.h.density_exp_clamp = r.f32();
    p.dspec = read_mlp_spec(r);
    p.cspec = read_mlp_spec(r);
    const uint32_t n3 = r.u32();
    if (n3 > 4096) throw FormatError("implausible 3D level count");
    for (uint32_t i = 0; i < n3; ++i) {
        const uint32_t res = r.u32();
        const uint64_t table = r.u64();
        p.h.levels_3d.push_back({res, table});
    }
    const uint32_t n2 = r.u32();
    if (n2 > 4096) throw FormatError("implausible 2D level count");
    for (uint32_t i = 0; i < n2; ++i) {
        const uint32_t res = r.u32();
        const uint64_t table = r.u64();
        p.h.levels_2d.push_back({res, table});
    }
    p.h.scale = r.f32();
    for (float& v : p.h.offset) v = r.f32();
    for (float& v : p.h.background) v = r.f32();
    p.h.grid_payload_bytes = r.u64();
    p.h.mlp_payload_bytes = r.u64();
    p.h.checksum = r.u32();
    p.header_bytes = r.consumed;
    return p;
}

uint32_t stream_crc(std::istream& in, uint64_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<uint8_t> chunk(1 << 16);
    uint64_t left = n;
    while (left > 0) {
        const std::size_t take = static_cast<std::size_t>(std::min<uint64_t>(left, chunk.size()));
        in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(take));
        if (static_cast<std::size_t>(in.gcount()) != take)
            throw FormatError("snapshot payload truncated");
        crc = crc32(crc, chunk.data(), static_cast<uInt>(take));
        left -= take;
    }
    return static_cast<uint32_t>(crc);
}

}  // namespace

SnapshotHeader read_info(const std::filesystem::path& path, uint64_t* file_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path.string());
    ParsedHeader p = parse_header(in, path.string());
    const uint32_t crc = stream_crc(in, p.h.grid_payload_bytes + p.h.mlp_payload_bytes);
    if (crc != p.h.checksum)
        throw ChecksumError("snapshot checksum mismatch in " + path.string());
    if (file_size)
        *file_size = p.header_bytes + p.h.grid_payload_bytes + p.h.mlp_payload_bytes;
    return p.h;
}

Snapshot load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path.string());
    ParsedHeader p = parse_header(in, path.string());

    const uint64_t payload_len = p.h.grid_payload_bytes + p.h.mlp_payload_bytes;
    std::vector<uint8_t> payload(payload_len);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_len));
    if (static_cast<uint64_t>(in.gcount()) != payload_len)
        throw FormatError("snapshot payload truncated: " + path.string());
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
    if (crc != p.h.checksum)
        throw ChecksumError("snapshot checksum mismatch in " + path.string());

    Snapshot snap;
    snap.header = p.h;
    snap.model = field::FieldModel(p.h.grid_config(), p.h.field_config());
    if (snap.model.density_mlp().spec().input_width != p.dspec.input_width ||
        snap.model.color_mlp().spec().input_width != p.cspec.input_width ||
        snap.model.density_mlp().spec().output_width != p.dspec.output_width)
        throw FormatError("snapshot MLP specs inconsistent with grid config");
    snap.transform.scale = p.h.scale;
    snap.transform.offset = {p.h.offset[0], p.h.offset[1], p.h.offset[2]};
    snap.background = {p.h.background[0], p.h.background[1], p.h.background[2]};

    // grid bits -> +-1 latents
    std::size_t off = 0;
    for (auto* t : snap.model.grid().all_tensors()) {
        binarize::PackedBits packed;
        packed.bit_count = t->latent.size();
        const std::size_t nbytes = (t->latent.size() + 7) / 8;
        if (off + nbytes > p.h.grid_payload_bytes)
            throw FormatError("grid payload shorter than the config requires");
        packed.bytes.assign(payload.begin() + off, payload.begin() + off + nbytes);
        off += nbytes;
        t->latent = binarize::unpack_bits(packed);
        std::fill(t->grads.begin(), t->grads.end(), 0.f);
    }
    if (off != p.h.grid_payload_bytes)
        throw FormatError("grid payload longer than the config requires");

    // MLP weights
    const bool fp16 = p.h.fp16();
    auto read_mlp = [&](nn::Mlp& mlp) {
        auto& values = mlp.params().values;
        const std::size_t bytes_per = fp16 ? 2 : 4;
        if (off + values.size() * bytes_per > payload.size())
            throw FormatError("MLP payload shorter than the spec requires");
        if (fp16) {
            for (auto& v : values) {
                uint16_t h = static_cast<uint16_t>(payload[off] | (payload[off + 1] << 8));
                v = half_to_float(h);
                off += 2;
            }
        } else {
            std::memcpy(values.data(), payload.data() + off, values.size() * 4);
            off += values.size() * 4;
        }
    };
    read_mlp(snap.model.density_mlp());
    read_mlp(snap.model.color_mlp());
    if (off != payload.size())
        throw FormatError("MLP payload longer than the spec requires");
    return snap;
}

SizeReport report_size(const field::FieldModel& model, bool mlp_fp16) {
    SizeReport r;
    r.fp16 = mlp_fp16;
    r.grid_bits = grid::payload_bits(model.grid().config());
    r.grid_bytes = 0;
    for (const auto* t : model.grid().all_tensors()) r.grid_bytes += (t->latent.size() + 7) / 8;
    r.mlp_params = model.density_mlp().spec().param_count() + model.color_mlp().spec().param_count();
    r.mlp_bytes_fp32 = r.mlp_params * 4;
    r.mlp_bytes_fp16 = r.mlp_params * 2;
    SnapshotHeader h = build_header(model, render::SceneTransform{}, Rgb{}, mlp_fp16);
    r.header_bytes = encode_header(h, model.density_mlp().spec(), model.color_mlp().spec()).size();
    return r;
}

SizeReport report_size(const SnapshotHeader& header) {
    field::FieldModel model(header.grid_config(), header.field_config());
    return report_size(model, header.fp16());
}

std::string SizeReport::to_text() const {
    const auto mb = [](uint64_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0); };
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "grid payload   %10llu bytes (%llu bits, %.4f MB)\n"
                  "mlp weights    %10llu bytes (%llu params, fp32 %.4f MB / fp16 %.4f MB)\n"
                  "header         %10llu bytes\n"
                  "total          %10llu bytes (%.4f MB)\n",
                  static_cast<unsigned long long>(grid_bytes),
                  static_cast<unsigned long long>(grid_bits), mb(grid_bytes),
                  static_cast<unsigned long long>(mlp_bytes()),
                  static_cast<unsigned long long>(mlp_params), mb(mlp_bytes_fp32), mb(mlp_bytes_fp16),
                  static_cast<unsigned long long>(header_bytes),
                  static_cast<unsigned long long>(total_bytes()), mb(total_bytes()));
    return buf;
}

uint16_t float_to_half(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    const uint32_t sign = (bits >> 16) & 0x8000u;
    const int32_t exp = static_cast<int32_t>((bits >> 23) & 0xff) - 127 + 15;
    uint32_t mant = bits & 0x7fffffu;
    if (exp >= 31) {
        // inf/NaN or overflow
        if (((bits >> 23) & 0xff) == 0xff && mant) return static_cast<uint16_t>(sign | 0x7e00u);
        return static_cast<uint16_t>(sign | 0x7c00u);
    }
    if (exp <= 0) {
        if (exp < -10) return static_cast<uint16_t>(sign);
        mant |= 0x800000u;
        const int shift = 14 - exp;
        uint32_t half_mant = mant >> shift;
        // round to nearest even
        const uint32_t rem = mant & ((1u << shift) - 1);
        const uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_mant & 1))) ++half_mant;
        return static_cast<uint16_t>(sign | half_mant);
    }
    uint32_t half = sign | (static_cast<uint32_t>(exp) << 10) | (mant >> 13);
    const uint32_t rem = mant & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1))) ++half;
    return static_cast<uint16_t>(half);
}

float half_to_float(uint16_t h) {
    const uint32_t sign = (static_cast<uint32_t>(h) & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1fu;
    uint32_t mant = h & 0x3ffu;
    uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // subnormal half -> normalized float
            int e = -1;
            do {
                mant <<= 1;
                ++e;
            } while (!(mant & 0x400u));
            mant &= 0x3ffu;
            bits = sign | ((127 - 15 - e) << 23) | (mant << 13);
        }
    } else if (exp ==  31) {
        bits = sign | 0x7f800000u | (mant << 13);
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float out;
    std::memcpy(&out, &bits, 4);
    return out;
}

}  // namespace birf::snapshot
