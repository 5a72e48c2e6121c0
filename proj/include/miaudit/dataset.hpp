#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "miaudit/tensor.hpp"

namespace miaudit {

// In-memory labeled dataset. Labels are 1-based; images hold [0,1]-scaled
// values in the per-example shape input_shape.
struct Dataset {
    Shape input_shape;
    int num_classes = 0;
    std::vector<std::vector<double>> examples;
    std::vector<int> labels;

    std::size_t size() const { return examples.size(); }
    Tensor example(std::size_t i) const {
        return Tensor::from_values(input_shape, examples.at(i));
    }
    int label(std::size_t i) const { return labels.at(i); }
};

// IDX (MNIST/Fashion-MNIST distribution format): big-endian magic + dims +
// raw ubyte payload. Image magic 0x00000803, label magic 0x00000801.
// Output shape is (1,H,W); raw labels are shifted to 1-based.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR binary records: 1 label byte + 3072 pixels (CIFAR-10) or coarse+fine
// label bytes + 3072 pixels (CIFAR-100). The variant is inferred from the
// file length; fine labels are used, shifted to 1-based. Shape (3,32,32).
Dataset load_cifar_bin(const std::string& path);

// Gaussian blobs with unit variance and class means `separation` apart
// (orthogonal directions while dimensions last). Deterministic under seed.
Dataset gen_synthetic(int classes, int per_class, int dim, double separation,
                      std::uint64_t seed);

// Serialize a dataset into a pair of IDX files (images + labels). Values are
// quantized to bytes; used for fixtures and desk-scale experiments.
void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path);

}  // namespace miaudit
