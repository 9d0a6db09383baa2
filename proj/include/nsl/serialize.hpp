#ifndef NSL_SERIALIZE_HPP
#define NSL_SERIALIZE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nsl/train.hpp"

namespace nsl {

// Model bundle document, format "nsl-model-bundle" v1. Doubles are written
// with 17 significant digits so reloading reproduces every parameter bit.
void write_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle read_bundle(const std::string& path);

// FNV-1a 64-bit content fingerprints (hex strings).
std::uint64_t fnv1a64(const void* data, size_t len);
std::string digest_file(const std::string& path);
std::string digest_hex(std::uint64_t value);

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;  // flag echo
    std::map<std::string, std::string> inputs;  // path -> digest
    std::string tool_version;
    double duration_seconds = 0;
};

void write_run_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace nsl

#endif  // NSL_SERIALIZE_HPP
