#include "nsl/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nsl/errors.hpp"

namespace nsl {

namespace {

constexpr int kBundleVersion = 1;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

void emit_double_array(std::ostream& os, const double* values, size_t count) {
    os << '[';
    for (size_t i = 0; i < count; ++i) {
        if (i) os << ',';
        os << fmt_double(values[i]);
    }
    os << ']';
}

}  // namespace

// The bundle is emitted by hand instead of through a JSON library so every
// double carries 17 significant digits and the byte stream is a pure
// function of the content.
void write_bundle(const std::string& path, const ModelBundle& bundle) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DecodeError("cannot write bundle: " + path);

    const TrainConfig& c = bundle.config;
    os << "{\n";
    os << "  \"format\": \"nsl-model-bundle\",\n";
    os << "  \"version\": " << kBundleVersion << ",\n";
    os << "  \"config\": {\n";
    os << "    \"learning_rate\": " << fmt_double(c.learning_rate) << ",\n";
    os << "    \"batch_size\": " << c.batch_size << ",\n";
    os << "    \"epochs\": " << c.epochs << ",\n";
    os << "    \"beta1\": " << fmt_double(c.beta1) << ",\n";
    os << "    \"beta2\": " << fmt_double(c.beta2) << ",\n";
    os << "    \"adam_eps\": " << fmt_double(c.adam_eps) << ",\n";
    os << "    \"epsilon\": " << fmt_double(c.eps) << ",\n";
    os << "    \"seed\": " << c.seed << ",\n";
    os << "    \"init_range\": " << fmt_double(c.init_range) << "\n";
    os << "  },\n";
    os << "  \"genes\": [";
    for (size_t i = 0; i < bundle.models.size(); ++i) {
        const TrainedGeneModel& m = bundle.models[i];
        os << (i ? ",\n" : "\n");
        os << "    {\n";
        os << "      \"gene\": \"" << json_escape(m.gene_name) << "\",\n";
        os << "      \"learnable_scalars\": 11,\n";
        os << "      \"config_digest\": \"" << digest_hex(m.config_digest) << "\",\n";
        os << "      \"stain_matrix\": ";
        emit_double_array(os, m.params.stain.raw.m.data(), 9);
        os << ",\n      \"stain_bias\": ";
        emit_double_array(os, m.params.c.data(), 3);
        os << ",\n      \"head_weight\": " << fmt_double(m.params.w);
        os << ",\n      \"head_bias\": " << fmt_double(m.params.b);
        os << ",\n      \"loss_trace\": ";
        emit_double_array(os, m.loss_trace.data(), m.loss_trace.size());
        os << "\n    }";
    }
    os << "\n  ],\n";
    os << "  \"failures\": [";
    for (size_t i = 0; i < bundle.failures.size(); ++i) {
        const GeneFailure& f = bundle.failures[i];
        os << (i ? ",\n" : "\n");
        os << "    {\"gene\": \"" << json_escape(f.gene_name) << "\", \"error\": \""
           << json_escape(f.error) << "\"}";
    }
    os << "\n  ]\n";
    os << "}\n";
    if (!os.good()) throw DecodeError("short write on bundle: " + path);
}

ModelBundle read_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DecodeError("cannot open bundle: " + path);

    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError("bundle parse error in " + path + ": " + e.what());
    }

    try {
        if (doc.at("format").get<std::string>() != "nsl-model-bundle") {
            throw DecodeError("not a model bundle: " + path);
        }
        if (doc.at("version").get<int>() != kBundleVersion) {
            throw DecodeError("unsupported bundle version in " + path);
        }

        ModelBundle bundle;
        const auto& cfg = doc.at("config");
        bundle.config.learning_rate = cfg.at("learning_rate").get<double>();
        bundle.config.batch_size = cfg.at("batch_size").get<int>();
        bundle.config.epochs = cfg.at("epochs").get<int>();
        bundle.config.beta1 = cfg.at("beta1").get<double>();
        bundle.config.beta2 = cfg.at("beta2").get<double>();
        bundle.config.adam_eps = cfg.at("adam_eps").get<double>();
        bundle.config.eps = cfg.at("epsilon").get<double>();
        bundle.config.seed = cfg.at("seed").get<std::uint64_t>();
        bundle.config.init_range = cfg.at("init_range").get<double>();

        for (const auto& gene : doc.at("genes")) {
            TrainedGeneModel m;
            m.gene_name = gene.at("gene").get<std::string>();
            m.config_digest =
                std::stoull(gene.at("config_digest").get<std::string>(), nullptr, 16);
            const auto& mat = gene.at("stain_matrix");
            if (mat.size() != 9) throw DecodeError("stain_matrix must have 9 entries");
            for (size_t i = 0; i < 9; ++i) m.params.stain.raw.m[i] = mat[i].get<double>();
            const auto& bias = gene.at("stain_bias");
            if (bias.size() != 3) throw DecodeError("stain_bias must have 3 entries");
            for (size_t i = 0; i < 3; ++i) m.params.c[i] = bias[i].get<double>();
            m.params.w = gene.at("head_weight").get<double>();
            m.params.b = gene.at("head_bias").get<double>();
            for (const auto& v : gene.at("loss_trace")) m.loss_trace.push_back(v.get<double>());
            bundle.models.push_back(std::move(m));
        }
        for (const auto& failure : doc.at("failures")) {
            bundle.failures.push_back({failure.at("gene").get<std::string>(),
                                       failure.at("error").get<std::string>()});
        }
        return bundle;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError("bundle schema error in " + path + ": " + e.what());
    }
}

std::uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(std::uint64_t value) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string digest_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DecodeError("cannot open for digest: " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        const auto n = static_cast<size_t>(is.gcount());
        const auto* p = reinterpret_cast<const unsigned char*>(buf);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    return "fnv1a64:" + digest_hex(h);
}

void write_run_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json doc;
    doc["command"] = manifest.command;
    doc["config"] = manifest.config;
    doc["inputs"] = manifest.inputs;
    doc["tool_version"] = manifest.tool_version;
    doc["duration_seconds"] = manifest.duration_seconds;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DecodeError("cannot write run manifest: " + path);
    os << doc.dump(2) << "\n";
}

}  // namespace nsl
