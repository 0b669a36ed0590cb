#include "safepatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace safepatch {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', '1'};
constexpr uint32_t kVersion = 1;

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void bytes(const std::string& s) { buf_.append(s); }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, size_t pos) : data_(data), pos_(pos) {}
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(data_[pos_++]);
    }
    uint16_t u16() {
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(u8()) << (8 * i);
        return v;
    }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    size_t pos() const { return pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size())
            throw CorruptFileError("checkpoint: truncated file");
    }
    const std::string& data_;
    size_t pos_;
};

uint64_t fnv1a(const char* data, size_t n) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace

const Tensor* Container::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_container(const std::string& path, const Container& c) {
    for (size_t i = 0; i < c.tensors.size(); ++i)
        for (size_t j = i + 1; j < c.tensors.size(); ++j)
            if (c.tensors[i].first == c.tensors[j].first)
                throw ContractError("write_container: duplicate tensor name '" +
                                    c.tensors[i].first + "'");

    ByteWriter w;
    w.u32(kVersion);
    w.u8(static_cast<uint8_t>(c.precision));
    w.u32(static_cast<uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        if (!t.defined())
            throw ContractError("write_container: undefined tensor '" + name + "'");
        if (!t.all_finite())
            throw NonFiniteError("write_container: tensor '" + name + "' holds non-finite values");
        if (name.size() > 0xFFFF)
            throw ContractError("write_container: tensor name too long");
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(name);
        w.u8(static_cast<uint8_t>(t.rank()));
        for (size_t d = 0; d < t.rank(); ++d) w.u64(static_cast<uint64_t>(t.shape()[d]));
        if (c.precision == Precision::f64) {
            for (int64_t i = 0; i < t.numel(); ++i) w.f64(t.data()[i]);
        } else {
            for (int64_t i = 0; i < t.numel(); ++i) w.f32(static_cast<float>(t.data()[i]));
        }
    }
    w.u32(static_cast<uint32_t>(c.meta.size()));
    for (const auto& [key, value] : c.meta) {
        w.u16(static_cast<uint16_t>(key.size()));
        w.bytes(key);
        w.u32(static_cast<uint32_t>(value.size()));
        w.bytes(value);
    }

    const uint64_t checksum = fnv1a(w.str().data(), w.str().size());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("write_container: cannot open " + path);
    f.write(kMagic, 4);
    f.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    ByteWriter tail;
    tail.u64(checksum);
    f.write(tail.str().data(), 8);
    if (!f)
        throw IoError("write_container: write failed for " + path);
}

Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("read_container: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 4 + 8 || std::memcmp(data.data(), kMagic, 4) != 0)
        throw CorruptFileError("checkpoint: bad magic in " + path);

    const size_t payload_end = data.size() - 8;
    ByteReader tail(data, payload_end);
    const uint64_t stored = tail.u64();
    const uint64_t computed = fnv1a(data.data() + 4, payload_end - 4);
    if (stored != computed)
        throw CorruptFileError("checkpoint: checksum mismatch in " + path);

    ByteReader r(data, 4);
    Container c;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw CorruptFileError("checkpoint: unsupported version " + std::to_string(version));
    const uint8_t prec = r.u8();
    if (prec > 1)
        throw CorruptFileError("checkpoint: unknown precision tag");
    c.precision = static_cast<Precision>(prec);
    const uint32_t ntensors = r.u32();
    for (uint32_t i = 0; i < ntensors; ++i) {
        const uint16_t name_len = r.u16();
        std::string name = r.bytes(name_len);
        const uint8_t rank = r.u8();
        Shape shape;
        for (uint8_t d = 0; d < rank; ++d) shape.push_back(static_cast<int64_t>(r.u64()));
        check_valid_shape(shape, "read_container");
        const int64_t n = shape_numel(shape);
        std::vector<double> values(static_cast<size_t>(n));
        if (c.precision == Precision::f64) {
            for (int64_t j = 0; j < n; ++j) values[static_cast<size_t>(j)] = r.f64();
        } else {
            for (int64_t j = 0; j < n; ++j) values[static_cast<size_t>(j)] = r.f32();
        }
        if (c.find(name))
            throw CorruptFileError("checkpoint: duplicate tensor name '" + name + "'");
        c.tensors.emplace_back(std::move(name), Tensor::from_data(shape, std::move(values)));
    }
    const uint32_t nmeta = r.u32();
    for (uint32_t i = 0; i < nmeta; ++i) {
        const uint16_t key_len = r.u16();
        std::string key = r.bytes(key_len);
        const uint32_t val_len = r.u32();
        c.meta[key] = r.bytes(val_len);
    }
    if (r.pos() != payload_end)
        throw CorruptFileError("checkpoint: trailing bytes in " + path);
    return c;
}

namespace {

std::string require_meta(const Container& c, const std::string& key) {
    auto it = c.meta.find(key);
    if (it == c.meta.end())
        throw CorruptFileError("checkpoint: missing meta key '" + key + "'");
    return it->second;
}

void require_kind(const Container& c, const std::string& path,
                  const std::vector<std::string>& accepted) {
    const std::string kind = require_meta(c, "kind");
    for (const auto& k : accepted)
        if (kind == k) return;
    throw WrongKindError("checkpoint: " + path + " holds kind '" + kind + "'");
}

// Fill an object's tensors by name, requiring an exact set match.
template <typename Params>
void fill_from(Params& params, const Container& c, const std::string& path) {
    size_t matched = 0;
    params.visit([&](const std::string& name, Tensor& t) {
        const Tensor* src = c.find(name);
        if (!src)
            throw CorruptFileError("checkpoint: " + path + " is missing tensor '" + name + "'");
        if (src->shape() != t.shape())
            throw CorruptFileError("checkpoint: tensor '" + name + "' has shape " +
                                   shape_str(src->shape()) + ", expected " + shape_str(t.shape()));
        t = src->clone();
        ++matched;
    });
    if (matched != c.tensors.size())
        throw CorruptFileError("checkpoint: " + path + " holds unexpected extra tensors");
}

} // namespace

void save_base(const std::string& path, DenoiserParams& base, const NoiseSchedule& schedule,
               Precision precision) {
    Container c;
    c.precision = precision;
    base.visit([&](const std::string& name, Tensor& t) { c.tensors.emplace_back(name, t); });
    c.meta["kind"] = "base";
    c.meta["arch"] = kArchTag;
    c.meta["schedule.steps"] = std::to_string(schedule.steps);
    c.meta["schedule.beta_start"] = std::to_string(schedule.betas.front());
    c.meta["schedule.beta_end"] = std::to_string(schedule.betas.back());
    write_container(path, c);
}

DenoiserParams load_base(const std::string& path, NoiseSchedule* schedule_out) {
    Container c = read_container(path);
    require_kind(c, path, {"base"});
    Rng scratch(0);
    DenoiserParams base = init_denoiser(scratch);
    fill_from(base, c, path);
    if (schedule_out) {
        const int steps = std::stoi(require_meta(c, "schedule.steps"));
        const double bs = std::stod(require_meta(c, "schedule.beta_start"));
        const double be = std::stod(require_meta(c, "schedule.beta_end"));
        *schedule_out = make_schedule(steps, bs, be);
    }
    return base;
}

void save_patch(const std::string& path, PatchParams& patch, Precision precision) {
    Container c;
    c.precision = precision;
    patch.visit([&](const std::string& name, Tensor& t) { c.tensors.emplace_back(name, t); });
    c.meta["kind"] = patch.meta.merged() ? "merged-patch" : "patch";
    c.meta["arch"] = patch.meta.arch;
    c.meta["category"] = patch.meta.category;
    c.meta["patch_version"] = std::to_string(patch.meta.version);
    if (patch.meta.merged()) c.meta["merged_from"] = patch.meta.merged_from;
    write_container(path, c);
}

PatchParams load_patch(const std::string& path) {
    Container c = read_container(path);
    require_kind(c, path, {"patch", "merged-patch"});
    Rng scratch(0);
    DenoiserParams dummy = init_denoiser(scratch);
    PatchParams patch = init_patch(dummy, scratch);
    fill_from(patch, c, path);
    patch.meta.arch = require_meta(c, "arch");
    patch.meta.category = require_meta(c, "category");
    patch.meta.version = std::stoi(require_meta(c, "patch_version"));
    auto it = c.meta.find("merged_from");
    patch.meta.merged_from = it == c.meta.end() ? "" : it->second;
    return patch;
}

void save_images(const std::string& path, const std::vector<Tensor>& images, Precision precision) {
    Container c;
    c.precision = precision;
    for (size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "image.%04zu", i);
        c.tensors.emplace_back(name, images[i]);
    }
    c.meta["kind"] = "images";
    c.meta["count"] = std::to_string(images.size());
    write_container(path, c);
}

std::vector<Tensor> load_images(const std::string& path) {
    Container c = read_container(path);
    require_kind(c, path, {"images"});
    std::vector<Tensor> out;
    out.reserve(c.tensors.size());
    for (auto& [name, t] : c.tensors) out.push_back(t);
    return out;
}

} // namespace safepatch
