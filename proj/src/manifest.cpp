#include "pgkm/manifest.hpp"

#include "pgkm/formats.hpp"

namespace pgkm {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw UsageError(where + ": missing '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError(where + ": '" + key + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return field<T>(j, key, where);
}

std::size_t positive_count(const json& j, const char* key, const std::string& where) {
    const auto v = field<std::int64_t>(j, key, where);
    if (v < 1) {
        throw UsageError(where + ": '" + key + "' must be at least 1");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw UsageError("manifest must be a JSON object");
    }
    const auto schema = field<int>(doc, "schema", "manifest");
    if (schema != kManifestSchema) {
        throw UsageError("unsupported manifest schema " + std::to_string(schema));
    }
    if (!doc.contains("layers") || !doc.at("layers").is_array()) {
        throw UsageError("manifest: 'layers' must be an array");
    }
    Manifest m;
    const auto& layers = doc.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& e = layers[i];
        std::string where = "manifest layer " + std::to_string(i);
        if (!e.is_object()) {
            throw UsageError(where + ": entry must be an object");
        }
        ManifestLayer l;
        const auto file = field<std::string>(e, "file", where);
        where += " ('" + file + "')";
        l.file = base_dir / file;
        l.block_size = positive_count(e, "block_size", where);
        l.num_centroids = positive_count(e, "num_centroids", where);
        if (auto method = optional_field<std::string>(e, "method", where)) {
            l.method = parse_method(*method);
        }
        if (auto seed = optional_field<std::uint64_t>(e, "seed", where)) {
            l.seed = *seed;
        }
        if (auto bits = optional_field<unsigned>(e, "original_bits", where)) {
            if (*bits == 0) {
                throw UsageError(where + ": 'original_bits' must be positive");
            }
            l.original_bits = *bits;
        }
        if (auto kind = optional_field<std::string>(e, "layer_type", where)) {
            l.layer_type = parse_layer_kind(*kind);
        }
        if (e.contains("dense")) {
            const auto& d = e.at("dense");
            if (!d.is_object()) {
                throw UsageError(where + ": 'dense' must be an object");
            }
            l.dense.epsilon = optional_field<double>(d, "epsilon", where);
            l.dense.c_sd = optional_field<double>(d, "c_sd", where);
            l.dense.c_mc = optional_field<double>(d, "c_mc", where);
        }
        m.layers.push_back(std::move(l));
    }
    if (m.layers.empty()) {
        throw UsageError("manifest lists no layers");
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

std::string dump_manifest(const Manifest& m, const std::filesystem::path& base_dir) {
    json layers = json::array();
    for (const auto& l : m.layers) {
        json e = {
            {"file", std::filesystem::relative(l.file, base_dir).generic_string()},
            {"block_size", l.block_size},
            {"num_centroids", l.num_centroids},
            {"original_bits", l.original_bits},
        };
        if (l.method) {
            e["method"] = std::string(to_string(*l.method));
        }
        if (l.seed) {
            e["seed"] = *l.seed;
        }
        if (l.layer_type) {
            e["layer_type"] = std::string(to_string(*l.layer_type));
        }
        json d = json::object();
        if (l.dense.epsilon) {
            d["epsilon"] = *l.dense.epsilon;
        }
        if (l.dense.c_sd) {
            d["c_sd"] = *l.dense.c_sd;
        }
        if (l.dense.c_mc) {
            d["c_mc"] = *l.dense.c_mc;
        }
        if (!d.empty()) {
            e["dense"] = d;
        }
        layers.push_back(std::move(e));
    }
    return json{{"schema", kManifestSchema}, {"layers", layers}}.dump(2) + "\n";
}

}  // namespace pgkm
