#pragma once

// torch's logging shim defines CHECK-style macros that collide with the test
// framework's asserts; include it first and clear them before doctest.
#include <torch/torch.h>
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LE
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_GT
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "retfuse/config.hpp"

namespace retfuse::testing {

/// Desk-scale config used throughout the test suites (d=32, 32px images,
/// tiny backbones, short text).
inline RunConfig toy_config() {
    RunConfig c;
    c.model_dim = 32;
    c.vision.image_side = 32;
    c.vision.patch_size = 16;
    c.vision.backbone_depth = 2;
    c.vision.backbone_hidden = 32;
    c.vision.backbone_heads = 4;
    c.vision.freeze_depth = 1;
    c.text.max_tokens = 24;
    c.text.kept_tokens = 8;
    c.text.backbone_hidden = 32;
    c.text.backbone_depth = 2;
    c.text.backbone_heads = 4;
    c.text.freeze_depth = 1;
    c.structured.hidden1 = 32;
    c.structured.hidden2 = 32;
    c.fusion.layers = 2;
    c.fusion.heads = 4;
    c.decoder.image_side = 32;
    c.decoder.image_base_channels = 8;
    c.train.batch_size = 8;
    return c;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("retfuse_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace retfuse::testing
