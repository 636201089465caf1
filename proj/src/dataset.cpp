#include "rankgauntlet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

namespace rankgauntlet {

Dataset Dataset::subset(std::span<const int> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

void Dataset::validate() const {
  if (labels.empty()) throw Error(ErrorCode::kEmptyDataset, "dataset has no samples");
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw Error(ErrorCode::kDimensionMismatch, "feature rows and labels disagree");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kDimensionMismatch, "label out of range");
  }
}

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.samples < 1 || spec.features < 1 || spec.classes < 2)
    throw Error(ErrorCode::kInvalidConfig, "blob spec needs samples >= 1, features >= 1, classes >= 2");
  Rng rng(derive_seed(seed, {stream::kData}));
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd centers(spec.classes, spec.features);
  for (int c = 0; c < spec.classes; ++c)
    for (int f = 0; f < spec.features; ++f) centers(c, f) = spec.center_spread * gauss(rng);

  std::vector<int> perm(static_cast<std::size_t>(spec.samples));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  Dataset d;
  d.num_classes = spec.classes;
  d.features.resize(spec.samples, spec.features);
  d.labels.resize(static_cast<std::size_t>(spec.samples));
  for (int i = 0; i < spec.samples; ++i) {
    const int row = perm[static_cast<std::size_t>(i)];
    const int c = i % spec.classes;
    d.labels[static_cast<std::size_t>(row)] = c;
    for (int f = 0; f < spec.features; ++f) d.features(row, f) = centers(c, f) + spec.noise * gauss(rng);
  }
  return d;
}

TrainTestSplit split_train_test(const Dataset& data, double train_fraction, std::uint64_t seed) {
  data.validate();
  std::vector<int> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {stream::kData, 1}));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(train_fraction * data.size());
  std::vector<int> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<int> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(tr.begin(), tr.end());
  std::sort(te.begin(), te.end());
  return {data.subset(tr), data.subset(te)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == ';' || ch == '\t' || ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

Dataset read_dataset(std::istream& is) {
  std::string line;
  int dims = -1;
  int classes = -1;
  std::vector<double> flat;
  std::vector<int> labels;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    try {
      if (dims < 0) {
        if (fields.size() != 2) throw Error(ErrorCode::kParseError, "header must be '<dims>,<classes>'");
        dims = std::stoi(fields[0]);
        classes = std::stoi(fields[1]);
        if (dims < 1 || classes < 2) throw Error(ErrorCode::kParseError, "header values out of range");
        continue;
      }
      if (static_cast<int>(fields.size()) != dims + 1)
        throw Error(ErrorCode::kParseError, "expected " + std::to_string(dims + 1) + " fields");
      for (int f = 0; f < dims; ++f) flat.push_back(std::stod(fields[static_cast<std::size_t>(f)]));
      labels.push_back(std::stoi(fields.back()));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": not a number");
    }
  }
  if (dims < 0) throw Error(ErrorCode::kEmptyDataset, "missing header");
  Dataset d;
  d.num_classes = classes;
  d.labels = std::move(labels);
  d.features.resize(static_cast<Eigen::Index>(d.labels.size()), dims);
  for (Eigen::Index i = 0; i < d.features.rows(); ++i)
    for (Eigen::Index f = 0; f < dims; ++f) d.features(i, f) = flat[static_cast<std::size_t>(i * dims + f)];
  d.validate();
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open dataset '" + path + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& os, const Dataset& data) {
  os << data.dims() << ',' << data.num_classes << '\n';
  os.precision(17);
  for (int i = 0; i < data.size(); ++i) {
    for (int f = 0; f < data.dims(); ++f) os << data.features(i, f) << ',';
    os << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

Dataset flip_labels(const Dataset& data) {
  Dataset out = data;
  for (auto& y : out.labels) y = data.num_classes - y - 1;
  return out;
}

}  // namespace rankgauntlet
