#ifndef NSL_TESTS_HELPERS_HPP
#define NSL_TESTS_HELPERS_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include "nsl/rng.hpp"
#include "nsl/stain.hpp"

namespace nsl::test {

// Unique temp directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("nsl_test_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline Patch random_patch(Rng& rng, int side) {
    Patch patch;
    patch.width = side;
    patch.height = side;
    patch.pixels.resize(static_cast<size_t>(side) * side);
    for (Vec3& p : patch.pixels) {
        p = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    return patch;
}

inline NslParams random_params(Rng& rng) {
    NslParams p;
    for (double& e : p.stain.raw.m) e = rng.uniform(0.2, 1.5);
    p.c = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    p.w = rng.uniform(-1.5, 1.5);
    p.b = rng.uniform(-0.5, 0.5);
    return p;
}

}  // namespace nsl::test

#endif  // NSL_TESTS_HELPERS_HPP
