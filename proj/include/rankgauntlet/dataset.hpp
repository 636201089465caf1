#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rankgauntlet {

struct Dataset {
  Eigen::MatrixXd features;  // samples x dims
  std::vector<int> labels;   // in [0, num_classes)
  int num_classes = 0;

  int size() const noexcept { return static_cast<int>(labels.size()); }
  int dims() const noexcept { return static_cast<int>(features.cols()); }
  bool empty() const noexcept { return labels.empty(); }

  Dataset subset(std::span<const int> rows) const;
  // Throws kEmptyDataset / kDimensionMismatch when the invariants fail.
  void validate() const;
};

struct BlobSpec {
  int samples = 3000;
  int features = 8;
  int classes = 3;
  double center_spread = 1.0;  // std of class centers
  double noise = 1.0;          // within-class std
};

// Gaussian blobs; class of sample i is i mod classes before shuffling.
Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};
TrainTestSplit split_train_test(const Dataset& data, double train_fraction, std::uint64_t seed);

// Text format: header line `<dims>,<classes>`, then one sample per line,
// `f1,f2,...,fd,label`. '#' starts a comment line.
Dataset read_dataset(std::istream& is);
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& os, const Dataset& data);

// Labels y -> C - y - 1.
Dataset flip_labels(const Dataset& data);

}  // namespace rankgauntlet
