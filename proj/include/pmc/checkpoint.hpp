#pragma once

#include <filesystem>
#include <string>

#include "pmc/io.hpp"
#include "pmc/nn.hpp"
#include "pmc/recognizer.hpp"

namespace pmc {

inline json tensor_to_json(const nn::Mat& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

inline nn::Mat tensor_from_json(const json& j, const std::string& name) {
  return detail::schema_guard("checkpoint tensor", [&] {
    const auto shape = j.at("shape").get<std::vector<long>>();
    const auto& data = j.at("data");
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 || !data.is_array() ||
        data.size() != static_cast<std::size_t>(shape[0] * shape[1])) {
      fail(ErrorKind::MalformedFile, "tensor '" + name + "' has inconsistent shape and data");
    }
    nn::Mat m(shape[0], shape[1]);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (!data[i].is_number()) fail(ErrorKind::MalformedFile, "non-numeric tensor entry in '" + name + "'");
        m(r, c) = data[i++].get<double>();
      }
    return m;
  });
}

inline json to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"hidden_dim", c.hidden_dim},
          {"window_size", c.window_size}, {"num_classes", c.num_classes},
          {"cell_kind", nn::to_string(c.cell_kind)}, {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.window_size = j.at("window_size").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.cell_kind = nn::cell_kind_from_string(j.at("cell_kind").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json to_json(const SegmentationConfig& c) {
  return {{"lambda", c.lambda},
          {"min_segment_frames", c.min_segment_frames},
          {"max_segment_frames", c.max_segment_frames}};
}

inline SegmentationConfig segmentation_config_from_json(const json& j) {
  SegmentationConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.min_segment_frames = j.at("min_segment_frames").get<int>();
  c.max_segment_frames = j.at("max_segment_frames").get<int>();
  return c;
}

inline json checkpoint_to_json(const TrainedModel& m) {
  json params = json::object();
  for (const auto& [name, t] : m.params.tensors()) params[name] = tensor_to_json(t);
  params["stats.mean"] = tensor_to_json(m.stats.mean);
  params["stats.std"] = tensor_to_json(m.stats.stddev);
  return {{"version", kFormatVersion},
          {"vocabulary", m.vocabulary.labels},
          {"config", {{"model", to_json(m.model_config)}, {"segmentation", to_json(m.segmentation)}}},
          {"parameters", std::move(params)}};
}

/// With `expected_vocabulary`, a checkpoint trained on different concepts is a VersionMismatch.
inline TrainedModel checkpoint_from_json(const json& j, const ConceptVocabulary* expected_vocabulary = nullptr) {
  detail::check_version(j, "checkpoint");
  TrainedModel m = detail::schema_guard("checkpoint", [&] {
    TrainedModel out;
    out.vocabulary.labels = j.at("vocabulary").get<std::vector<std::string>>();
    out.model_config = model_config_from_json(j.at("config").at("model"));
    out.segmentation = segmentation_config_from_json(j.at("config").at("segmentation"));
    for (const auto& [name, t] : j.at("parameters").items()) {
      auto mat = tensor_from_json(t, name);
      if (name == "stats.mean") {
        out.stats.mean = mat.col(0);
      } else if (name == "stats.std") {
        out.stats.stddev = mat.col(0);
      } else {
        out.params[name] = std::move(mat);
      }
    }
    return out;
  });
  if (expected_vocabulary != nullptr && !(m.vocabulary == *expected_vocabulary)) {
    fail(ErrorKind::VersionMismatch, "checkpoint vocabulary differs from the expected vocabulary");
  }
  validate(m.vocabulary);
  try {
    validate(m.model_config);
    validate(m.segmentation);
  } catch (const Error& e) {
    fail(ErrorKind::MalformedFile, std::string("checkpoint config: ") + e.what());
  }
  require(m.model_config.num_classes == m.vocabulary.num_classes(), ErrorKind::VersionMismatch,
          "checkpoint class count does not match its vocabulary");
  require(m.stats.mean.size() == m.model_config.feature_dim && m.stats.stddev.size() == m.model_config.feature_dim,
          ErrorKind::MalformedFile, "checkpoint feature statistics missing or mis-sized");
  const auto expected = Recognizer(m.model_config).init_params();
  require(expected.tensors().size() == m.params.tensors().size(), ErrorKind::MalformedFile,
          "checkpoint parameter set incomplete");
  for (const auto& [name, t] : expected.tensors()) {
    const auto& got = m.params.at(name);
    require(got.rows() == t.rows() && got.cols() == t.cols(), ErrorKind::MalformedFile,
            "checkpoint tensor '" + name + "' has the wrong shape");
  }
  return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::filesystem::path& path) {
  write_json_file(path, checkpoint_to_json(m));
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path,
                                    const ConceptVocabulary* expected_vocabulary = nullptr) {
  return checkpoint_from_json(read_json_file(path), expected_vocabulary);
}

}  // namespace pmc
