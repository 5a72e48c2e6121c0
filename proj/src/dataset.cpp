#include "miaudit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "miaudit/rng.hpp"

namespace miaudit {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
    if (off + 4 > b.size()) throw DataError("truncated file: " + path);
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != kIdxImageMagic) {
        throw DataError("bad IDX image magic in " + images_path);
    }
    const std::uint32_t count = read_be32(img, 4, images_path);
    const std::uint32_t H = read_be32(img, 8, images_path);
    const std::uint32_t W = read_be32(img, 12, images_path);
    const std::size_t pixels = std::size_t(H) * W;
    if (img.size() != 16 + std::size_t(count) * pixels) {
        throw DataError("truncated IDX image file: " + images_path);
    }

    const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != kIdxLabelMagic) {
        throw DataError("bad IDX label magic in " + labels_path);
    }
    const std::uint32_t lab_count = read_be32(lab, 4, labels_path);
    if (lab.size() != 8 + std::size_t(lab_count)) {
        throw DataError("truncated IDX label file: " + labels_path);
    }
    if (lab_count != count) {
        throw DataError("IDX image/label count mismatch: " + std::to_string(count) + " vs " +
                        std::to_string(lab_count));
    }

    Dataset d;
    d.input_shape = {1, H, W};
    d.examples.reserve(count);
    d.labels.reserve(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<double> x(pixels);
        const unsigned char* src = &img[16 + std::size_t(i) * pixels];
        for (std::size_t p = 0; p < pixels; ++p) x[p] = src[p] / 255.0;
        d.examples.push_back(std::move(x));
        const int label = int(lab[8 + i]) + 1;
        max_label = std::max(max_label, label);
        d.labels.push_back(label);
    }
    d.num_classes = std::max(max_label, 10);
    return d;
}

Dataset load_cifar_bin(const std::string& path) {
    const auto bytes = read_file(path);
    constexpr std::size_t kPixels = 3072;
    std::size_t label_bytes = 0;
    if (bytes.size() % (kPixels + 1) == 0) {
        label_bytes = 1;
    } else if (bytes.size() % (kPixels + 2) == 0) {
        label_bytes = 2;
    } else {
        throw DataError("file length " + std::to_string(bytes.size()) +
                        " is not a multiple of a CIFAR record size: " + path);
    }
    const std::size_t record = kPixels + label_bytes;
    const std::size_t count = bytes.size() / record;

    Dataset d;
    d.input_shape = {3, 32, 32};
    d.num_classes = label_bytes == 1 ? 10 : 100;
    d.examples.reserve(count);
    d.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* rec = &bytes[i * record];
        // fine label is the last label byte
        d.labels.push_back(int(rec[label_bytes - 1]) + 1);
        std::vector<double> x(kPixels);
        for (std::size_t p = 0; p < kPixels; ++p) x[p] = rec[label_bytes + p] / 255.0;
        d.examples.push_back(std::move(x));
    }
    return d;
}

Dataset gen_synthetic(int classes, int per_class, int dim, double separation,
                      std::uint64_t seed) {
    if (classes < 2) throw ConfigError("gen_synthetic: classes must be >= 2");
    if (per_class < 1) throw ConfigError("gen_synthetic: per_class must be >= 1");
    if (dim < 1) throw ConfigError("gen_synthetic: dim must be >= 1");
    if (!(separation > 0.0)) throw ConfigError("gen_synthetic: separation must be > 0");

    Rng rng(seed);

    // Class means: Gram-Schmidt over seeded Gaussian draws gives orthonormal
    // directions (pairwise mean distance == separation) while dim allows.
    std::vector<std::vector<double>> means;
    const double radius = separation / std::sqrt(2.0);
    for (int c = 0; c < classes; ++c) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = rng.normal();
        if (c < dim) {
            for (const auto& prev : means) {
                double dot = 0.0, nn = 0.0;
                for (int i = 0; i < dim; ++i) {
                    dot += v[i] * prev[i];
                    nn += prev[i] * prev[i];
                }
                if (nn > 0.0) {
                    for (int i = 0; i < dim; ++i) v[i] -= prev[i] * dot / nn;
                }
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            v.assign(static_cast<std::size_t>(dim), 0.0);
            v[static_cast<std::size_t>(c % dim)] = 1.0;
            norm = 1.0;
        }
        for (auto& x : v) x *= radius / norm;
        means.push_back(std::move(v));
    }

    Dataset d;
    d.input_shape = {static_cast<std::size_t>(dim)};
    d.num_classes = classes;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> x(static_cast<std::size_t>(dim));
            for (int j = 0; j < dim; ++j) x[j] = means[c][j] + rng.normal();
            d.examples.push_back(std::move(x));
            d.labels.push_back(c + 1);
        }
    }
    return d;
}

void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path) {
    if (data.input_shape.size() != 3 || data.input_shape[0] != 1) {
        throw DataError("write_idx: dataset shape must be (1,H,W)");
    }
    const std::size_t H = data.input_shape[1], W = data.input_shape[2];

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot open for writing: " + images_path);
    write_be32(img, kIdxImageMagic);
    write_be32(img, static_cast<std::uint32_t>(data.size()));
    write_be32(img, static_cast<std::uint32_t>(H));
    write_be32(img, static_cast<std::uint32_t>(W));
    for (const auto& x : data.examples) {
        for (double v : x) {
            const double q = std::min(255.0, std::max(0.0, std::nearbyint(v * 255.0)));
            const unsigned char b = static_cast<unsigned char>(q);
            img.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    if (!img) throw DataError("failed writing: " + images_path);

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot open for writing: " + labels_path);
    write_be32(lab, kIdxLabelMagic);
    write_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (int l : data.labels) {
        const unsigned char b = static_cast<unsigned char>(l - 1);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!lab) throw DataError("failed writing: " + labels_path);
}

}  // namespace miaudit
