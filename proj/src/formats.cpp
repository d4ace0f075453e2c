#include "pgkm/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <system_error>

namespace pgkm {

namespace {

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int s = 0; s < 16; s += 8) {
            out_.push_back(static_cast<std::uint8_t>(v >> s));
        }
    }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) {
            out_.push_back(static_cast<std::uint8_t>(v >> s));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void floats(std::span<const float> v) {
        out_.reserve(out_.size() + v.size() * 4);
        for (float x : v) {
            f32(x);
        }
    }
    void string16(const std::string& s, const char* what) {
        if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw UsageError(std::string(what) + " longer than 65535 bytes");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> in, const char* format) : in_(in), format_(format) {}

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        if (in_.size() - pos_ < n) {
            throw FormatError(std::string(format_) + ": truncated while reading " + what);
        }
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(const char* what) { return take(1, what)[0]; }
    std::uint16_t u16(const char* what) {
        auto s = take(2, what);
        return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        auto s = take(4, what);
        return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
               (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
    }
    std::vector<float> floats(std::size_t count, const char* what) {
        if (count > (in_.size() - pos_) / 4) {
            throw FormatError(std::string(format_) + ": truncated while reading " + what);
        }
        std::vector<float> v(count);
        for (auto& x : v) {
            x = std::bit_cast<float>(u32(what));
        }
        return v;
    }
    std::string string16(const char* what) {
        const auto n = u16(what);
        auto s = take(n, what);
        return {reinterpret_cast<const char*>(s.data()), s.size()};
    }
    void magic(const char (&expected)[5]) {
        if (in_.size() < 4 || std::memcmp(in_.data(), expected, 4) != 0) {
            throw FormatError(std::string(format_) + ": bad magic");
        }
        pos_ = 4;
    }
    void version(std::uint16_t expected) {
        const auto v = u16("version");
        if (v != expected) {
            throw FormatError(std::string(format_) + ": unsupported version " + std::to_string(v));
        }
    }
    std::size_t remaining() const { return in_.size() - pos_; }
    void finish() const {
        if (pos_ != in_.size()) {
            throw FormatError(std::string(format_) + ": " + std::to_string(in_.size() - pos_) +
                              " trailing bytes");
        }
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    const char* format_;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw UsageError(std::string(what) + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

LayerKind kind_from_byte(std::uint8_t v, const char* format) {
    if (v > 1) {
        throw FormatError(std::string(format) + ": unknown layer kind " + std::to_string(v));
    }
    return static_cast<LayerKind>(v);
}

}  // namespace

Bytes serialize_tensor(const TensorFile& t) {
    if (t.tensor.values.size() != t.tensor.rows * t.tensor.cols) {
        throw UsageError("tensor '" + t.name + "' payload does not match its shape");
    }
    Writer w;
    w.raw("PGW1", 4);
    w.u16(kTensorFileVersion);
    w.string16(t.name, "tensor name");
    w.u8(static_cast<std::uint8_t>(t.kind));
    w.u32(checked_u32(t.tensor.rows, "rows"));
    w.u32(checked_u32(t.tensor.cols, "cols"));
    w.floats(t.tensor.values);
    return w.take();
}

TensorFile parse_tensor(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "PGW1");
    r.magic("PGW1");
    r.version(kTensorFileVersion);
    TensorFile t;
    t.name = r.string16("name");
    t.kind = kind_from_byte(r.u8("kind"), "PGW1");
    t.tensor.rows = r.u32("rows");
    t.tensor.cols = r.u32("cols");
    const std::uint64_t count = static_cast<std::uint64_t>(t.tensor.rows) * t.tensor.cols;
    if (count * 4 != r.remaining()) {
        throw FormatError("PGW1: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(count * 4));
    }
    t.tensor.values = r.floats(count, "payload");
    r.finish();
    return t;
}

Bytes pack_indices(std::span<const std::uint32_t> index, unsigned bits) {
    Bytes out((index.size() * bits + 7) / 8, 0);
    std::size_t bit = 0;
    for (auto v : index) {
        if (bits < 32 && (v >> bits) != 0) {
            throw UsageError("index " + std::to_string(v) + " does not fit in " +
                             std::to_string(bits) + " bits");
        }
        for (unsigned i = 0; i < bits; ++i, ++bit) {
            if ((v >> i) & 1u) {
                out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
            }
        }
    }
    return out;
}

std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> packed, std::size_t count,
                                          unsigned bits) {
    if (packed.size() != (count * bits + 7) / 8) {
        throw FormatError("packed index stream has the wrong length");
    }
    std::vector<std::uint32_t> out(count, 0);
    std::size_t bit = 0;
    for (auto& v : out) {
        for (unsigned i = 0; i < bits; ++i, ++bit) {
            if ((packed[bit / 8] >> (bit % 8)) & 1u) {
                v |= 1u << i;
            }
        }
    }
    return out;
}

nlohmann::json report_to_json(const QuantReport& r, bool include_timing) {
    nlohmann::json j = {
        {"empty_clusters", r.empty_clusters},
        {"resolution_iters", r.resolution_iters},
        {"kmeans_iters", r.kmeans_iters},
        {"mse", r.mse},
        {"compressed_bytes", r.compressed_bytes},
        {"original_bytes", r.original_bytes},
        {"original_bits", r.original_bits},
        {"compression_ratio", r.compression_ratio},
    };
    if (include_timing) {
        j["wall_time_ms"] = r.wall_time_ms;
    }
    if (r.dense_applied) {
        j["dense"] = {
            {"consolidated_rows", r.consolidated_rows},
            {"clusters", r.dense_clusters},
            {"epsilon", r.dense_epsilon},
            {"epsilon_shrinks", r.dense_epsilon_shrinks},
            {"identity_fallback", r.dense_identity_fallback},
        };
    }
    return j;
}

QuantReport report_from_json(const nlohmann::json& j) {
    QuantReport r;
    try {
        r.empty_clusters = j.at("empty_clusters").get<std::size_t>();
        r.resolution_iters = j.at("resolution_iters").get<std::size_t>();
        r.kmeans_iters = j.at("kmeans_iters").get<std::size_t>();
        r.mse = j.at("mse").get<double>();
        r.compressed_bytes = j.at("compressed_bytes").get<std::uint64_t>();
        r.original_bytes = j.at("original_bytes").get<std::uint64_t>();
        r.original_bits = j.at("original_bits").get<unsigned>();
        r.compression_ratio = j.at("compression_ratio").get<double>();
        r.wall_time_ms = j.value("wall_time_ms", 0.0);
        if (j.contains("dense")) {
            const auto& d = j.at("dense");
            r.dense_applied = true;
            r.consolidated_rows = d.at("consolidated_rows").get<std::size_t>();
            r.dense_clusters = d.at("clusters").get<std::size_t>();
            r.dense_epsilon = d.at("epsilon").get<double>();
            r.dense_epsilon_shrinks = d.at("epsilon_shrinks").get<std::size_t>();
            r.dense_identity_fallback = d.at("identity_fallback").get<bool>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return r;
}

Bytes serialize_quantized(const QuantizedLayer& q) {
    const auto& s = q.spec;
    if (q.codebook.size() != s.num_centroids || q.codebook.dim() != s.block_size ||
        q.assignment.size() != s.num_blocks()) {
        throw UsageError("quantized layer '" + s.name + "' is inconsistent with its spec");
    }
    Writer w;
    w.raw("PGQ1", 4);
    w.u16(kQuantFileVersion);
    w.string16(s.name, "layer name");
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(checked_u32(s.rows, "rows"));
    w.u32(checked_u32(s.cols, "cols"));
    w.u32(checked_u32(s.block_size, "block size"));
    w.u32(checked_u32(s.num_centroids, "centroid count"));
    w.u8(static_cast<std::uint8_t>(q.method));
    w.floats(q.codebook.values());
    const auto packed = pack_indices(q.assignment.index(), index_bits(s.num_centroids));
    w.raw(packed.data(), packed.size());
    const auto report = report_to_json(q.report).dump();
    w.u32(checked_u32(report.size(), "report"));
    w.raw(report.data(), report.size());
    return w.take();
}

QuantizedLayer parse_quantized(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "PGQ1");
    r.magic("PGQ1");
    r.version(kQuantFileVersion);
    QuantizedLayer q;
    auto& s = q.spec;
    s.name = r.string16("name");
    s.kind = kind_from_byte(r.u8("kind"), "PGQ1");
    s.rows = r.u32("rows");
    s.cols = r.u32("cols");
    s.block_size = r.u32("block size");
    s.num_centroids = r.u32("centroid count");
    const auto method = r.u8("method");
    if (method > 2) {
        throw FormatError("PGQ1: unknown method " + std::to_string(method));
    }
    q.method = static_cast<Method>(method);
    try {
        s.validate();
    } catch (const UsageError& e) {
        throw FormatError(std::string("PGQ1: ") + e.what());
    }
    const std::size_t k = s.num_centroids;
    const std::size_t b = s.block_size;
    const std::size_t n = s.num_blocks();
    q.codebook = Codebook(k, b, r.floats(k * b, "codebook"));
    const unsigned bits = index_bits(k);
    auto index = unpack_indices(r.take((n * bits + 7) / 8, "indices"), n, bits);
    for (auto v : index) {
        if (v >= k) {
            throw FormatError("PGQ1: index " + std::to_string(v) + " out of range");
        }
    }
    q.assignment = Assignment(std::move(index), k);
    const auto len = r.u32("report length");
    auto text = r.take(len, "report");
    r.finish();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("PGQ1: report: ") + e.what());
    }
    q.report = report_from_json(j);
    return q;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot open '" + path.string() + "'");
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw std::runtime_error("short write to '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot rename onto '" + path.string() + "'");
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_tensor(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
    write_file_atomic(path, serialize_tensor(t));
}

QuantizedLayer read_quantized_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_quantized(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_quantized_file(const std::filesystem::path& path, const QuantizedLayer& q) {
    write_file_atomic(path, serialize_quantized(q));
}

}  // namespace pgkm
