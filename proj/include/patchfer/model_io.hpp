#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchfer/pipeline.hpp"

// Model file layout:
//   8 bytes   magic "PATCHFER"
//   u32 LE    format version
//   u64 LE    header length, followed by that many bytes of JSON
//   u64 LE    array count
//   per array: u64 LE element count, then that many IEEE-754 doubles (LE)
// The JSON header names every array in order together with its shape.

namespace patchfer {

namespace model_detail {

inline constexpr char kMagic[8] = {'P', 'A', 'T', 'C', 'H', 'F', 'E', 'R'};

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ModelError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ModelError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

struct ArrayWriter {
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<std::vector<double>> arrays;

  // Matrices are stored row-major.
  void add(const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    }
    manifest.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    arrays.push_back(std::move(flat));
  }

  void add(const std::string& name, const Eigen::VectorXd& v) {
    manifest.push_back({{"name", name}, {"rows", v.size()}, {"cols", 1}});
    arrays.emplace_back(v.data(), v.data() + v.size());
  }
};

class ArrayReader {
public:
  ArrayReader(const nlohmann::json& manifest, std::vector<std::vector<double>> arrays)
      : manifest_(manifest), arrays_(std::move(arrays)) {
    if (!manifest_.is_array() || manifest_.size() != arrays_.size()) {
      throw ModelError("array section does not match the header's array list");
    }
  }

  Eigen::MatrixXd matrix(const std::string& name) {
    if (next_ >= arrays_.size()) throw ModelError("model is missing array '" + name + "'");
    const auto& entry = manifest_.at(next_);
    if (entry.at("name").get<std::string>() != name) {
      throw ModelError("expected array '" + name + "', found '" + entry.at("name").get<std::string>() + "'");
    }
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto& data = arrays_[next_++];
    if (rows < 0 || cols < 0 || std::size_t(rows) * std::size_t(cols) != data.size()) {
      throw ModelError("array '" + name + "' has inconsistent shape");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[std::size_t(r * cols + c)];
    }
    return m;
  }

  Eigen::VectorXd vector(const std::string& name) {
    const Eigen::MatrixXd m = matrix(name);
    if (m.cols() != 1) throw ModelError("array '" + name + "' is not a vector");
    return m.col(0);
  }

  bool exhausted() const { return next_ == arrays_.size(); }

private:
  const nlohmann::json& manifest_;
  std::vector<std::vector<double>> arrays_;
  std::size_t next_ = 0;
};

}  // namespace model_detail

inline void save_model(const TrainedModel& model, std::ostream& os) {
  using namespace model_detail;
  ArrayWriter w;
  const auto& p = model.projection;
  w.add("scaler_mean", p.scaler.mean);
  w.add("scaler_stddev", p.scaler.stddev);
  w.add("pca_mean", p.pca.mean);
  w.add("pca_basis", p.pca.basis);
  w.add("pca_eigenvalues", p.pca.eigenvalues);
  w.add("lda_basis", p.lda.basis);
  w.add("lda_eigenvalues", p.lda.eigenvalues);
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i = 0; i < model.ensemble.members.size(); ++i) {
    const svm::BinarySvm& m = model.ensemble.members[i];
    const std::string tag = "svm" + std::to_string(i);
    w.add(tag + "_support", m.support);
    w.add(tag + "_coef", m.coef);
    w.add(tag + "_bias", Eigen::VectorXd(Eigen::VectorXd::Constant(1, m.bias)));
    members.push_back({{"first", m.first},
                       {"second", m.second},
                       {"train_count", m.train_count},
                       {"kernel",
                        {{"kind", svm::to_string(m.kernel.kind)},
                         {"gamma", m.kernel.gamma},
                         {"degree", m.kernel.degree},
                         {"coef0", m.kernel.coef0}}}});
  }
  const nlohmann::json header = {
      {"format_version", TrainedModel::kFormatVersion},
      {"config", to_json(model.config)},
      {"classes", model.class_names},
      {"n_classes", model.ensemble.n_classes},
      {"svms", members},
      {"arrays", w.manifest},
  };
  const std::string text = header.dump(1);
  os.write(kMagic, sizeof kMagic);
  put_u32(os, TrainedModel::kFormatVersion);
  put_u64(os, text.size());
  os.write(text.data(), std::streamsize(text.size()));
  put_u64(os, w.arrays.size());
  for (const auto& a : w.arrays) {
    put_u64(os, a.size());
    for (double v : a) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw IoError("failed writing model");
}

inline TrainedModel load_model(std::istream& is) {
  using namespace model_detail;
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ModelError("not a model file (bad magic)");
  }
  const std::uint32_t version = get_u32(is);
  if (version != TrainedModel::kFormatVersion) {
    throw ModelError("unsupported model format version " + std::to_string(version));
  }
  const std::uint64_t header_len = get_u64(is);
  if (header_len > (std::uint64_t(1) << 32)) throw ModelError("model header length is implausible");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), std::streamsize(header_len))) throw ModelError("model file truncated in header");

  try {
    const nlohmann::json header = nlohmann::json::parse(text);
    if (header.at("format_version").get<std::uint32_t>() != version) throw ModelError("header version mismatch");
    const std::uint64_t count = get_u64(is);
    if (count != header.at("arrays").size()) throw ModelError("array count does not match header");
    std::vector<std::vector<double>> arrays;
    for (std::uint64_t a = 0; a < count; ++a) {
      const std::uint64_t n = get_u64(is);
      if (n > (std::uint64_t(1) << 34)) throw ModelError("array length is implausible");
      std::vector<double> v(n);
      for (auto& x : v) x = std::bit_cast<double>(get_u64(is));
      arrays.push_back(std::move(v));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw ModelError("trailing bytes after model data");

    TrainedModel model;
    model.config = config_from_json(header.at("config"));
    model.class_names = header.at("classes").get<std::vector<std::string>>();
    model.ensemble.n_classes = header.at("n_classes").get<int>();
    ArrayReader r(header.at("arrays"), std::move(arrays));
    auto& p = model.projection;
    p.scaler.mean = r.vector("scaler_mean");
    p.scaler.stddev = r.vector("scaler_stddev");
    p.pca.mean = r.vector("pca_mean");
    p.pca.basis = r.matrix("pca_basis");
    p.pca.eigenvalues = r.vector("pca_eigenvalues");
    p.lda.basis = r.matrix("lda_basis");
    p.lda.eigenvalues = r.vector("lda_eigenvalues");
    const auto& svms = header.at("svms");
    for (std::size_t i = 0; i < svms.size(); ++i) {
      const auto& s = svms[i];
      svm::BinarySvm m;
      m.first = s.at("first").get<int>();
      m.second = s.at("second").get<int>();
      m.train_count = s.at("train_count").get<int>();
      const auto& k = s.at("kernel");
      m.kernel = {svm::kernel_kind_from_string(k.at("kind").get<std::string>()), k.at("gamma").get<double>(),
                  k.at("degree").get<int>(), k.at("coef0").get<double>()};
      const std::string tag = "svm" + std::to_string(i);
      m.support = r.matrix(tag + "_support");
      m.coef = r.vector(tag + "_coef");
      m.bias = r.vector(tag + "_bias")[0];
      model.ensemble.members.push_back(std::move(m));
    }
    if (!r.exhausted()) throw ModelError("model carries unexpected arrays");

    // Shape consistency across stages.
    const auto d = p.scaler.mean.size();
    if (p.scaler.stddev.size() != d || p.pca.mean.size() != d || p.pca.basis.rows() != d ||
        p.lda.basis.rows() != p.pca.basis.cols()) {
      throw ModelError("projection stages have inconsistent dimensions");
    }
    if (std::size_t(d) != model.config.feature_length()) {
      throw ModelError("projection input does not match the embedded feature configuration");
    }
    if (model.ensemble.members.size() != svm::OvoEnsemble::pair_count(model.ensemble.n_classes)) {
      throw ModelError("ensemble does not hold one machine per class pair");
    }
    for (const auto& m : model.ensemble.members) {
      if (m.support.cols() != p.lda.basis.cols() || m.coef.size() != m.support.rows() || m.support.rows() < 1) {
        throw ModelError("SVM shapes do not match the reduced dimension");
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model header: ") + e.what());
  } catch (const ParseError& e) {
    throw ModelError(std::string("malformed model header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ModelError(std::string("malformed model header: ") + e.what());
  }
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  save_model(model, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = buf.str();
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  return load_model(in);
}

inline std::string model_bytes(const TrainedModel& model) {
  std::ostringstream buf(std::ios::binary);
  save_model(model, buf);
  return buf.str();
}

}  // namespace patchfer
