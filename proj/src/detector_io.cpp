#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wmtrace/detector.hpp"
#include "wmtrace/error.hpp"

namespace wmtrace::detector {
namespace {

using nlohmann::json;

Vector read_vector(const json& arr, std::size_t expected, const char* field) {
  if (!arr.is_array() || arr.size() != expected) {
    throw Error(ErrorCode::FormatError, std::string(field) + " must be an array of " + std::to_string(expected) +
                                            " numbers");
  }
  Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    if (!arr[i].is_number()) throw Error(ErrorCode::FormatError, std::string(field) + " holds a non-number");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    if (!std::isfinite(v(static_cast<Eigen::Index>(i)))) {
      throw Error(ErrorCode::FormatError, std::string(field) + " holds a non-finite value");
    }
  }
  return v;
}

json flat(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

json flat(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Matrix read_matrix(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* field) {
  const Vector flat_values = read_vector(arr, static_cast<std::size_t>(rows * cols), field);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat_values(r * cols + c);
  return m;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

EmbeddingPair parse_embedding_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::FormatError, "record must be a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw Error(ErrorCode::FormatError, "record needs a string id");
  if (!j.contains("dim") || !j["dim"].is_number_integer() || j["dim"].get<long long>() <= 0) {
    throw Error(ErrorCode::FormatError, "record needs a positive integer dim");
  }
  const auto dim = static_cast<std::size_t>(j["dim"].get<long long>());

  EmbeddingPair pair;
  pair.id = j["id"].get<std::string>();
  pair.e_img = read_vector(j.value("e_img", json()), dim, "e_img");
  pair.e_txt = read_vector(j.value("e_txt", json()), dim, "e_txt");
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_number_integer() || (j["label"] != 0 && j["label"] != 1)) {
      throw Error(ErrorCode::FormatError, "label must be 0, 1 or null");
    }
    pair.label = j["label"].get<int>();
  }
  if (j.contains("text") && j["text"].is_string()) pair.text = j["text"].get<std::string>();
  return pair;
}

std::vector<EmbeddingPair> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<EmbeddingPair> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_embedding_record(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (out.back().dim() != out.front().dim()) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no) +
                                              ": dim differs from the first record");
    }
  }
  return out;
}

std::string to_jsonl_record(const EmbeddingPair& pair) {
  json j = json::object();
  j["id"] = pair.id;
  j["label"] = pair.label ? json(*pair.label) : json(nullptr);
  j["dim"] = pair.dim();
  j["e_img"] = flat(pair.e_img);
  j["e_txt"] = flat(pair.e_txt);
  if (!pair.text.empty()) j["text"] = pair.text;
  return j.dump();
}

void save_jsonl(const std::vector<EmbeddingPair>& data, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : data) text += to_jsonl_record(p) + "\n";
  spit(path, text);
}

std::string checkpoint_to_json(const DetectorModel& model) {
  model.validate();
  nlohmann::ordered_json j;
  j["format"] = "wmtrace-detector";
  j["format_version"] = kCheckpointVersion;
  j["embed_dim"] = model.embed_dim();
  j["input_dim"] = model.input_dim();
  j["hidden1"] = model.hidden1();
  j["hidden2"] = model.hidden2();
  j["dropout_rate"] = model.dropout_rate;
  j["threshold"] = model.threshold;
  j["W1"] = flat(model.W1);
  j["b1"] = flat(model.b1);
  j["W2"] = flat(model.W2);
  j["b2"] = flat(model.b2);
  j["w3"] = flat(model.w3);
  j["b3"] = model.b3;
  return j.dump() + "\n";
}

DetectorModel checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::FormatError, "checkpoint must be a JSON object");
  DetectorModel m;
  try {
    if (j.value("format_version", -1) != kCheckpointVersion) {
      throw Error(ErrorCode::FormatError, "unsupported checkpoint format_version");
    }
    const auto in = j.value("input_dim", 0);
    const auto h1 = j.value("hidden1", 0);
    const auto h2 = j.value("hidden2", 0);
    if (in <= 0 || h1 <= 0 || h2 <= 0 || (in - 1) % 4 != 0) {
      throw Error(ErrorCode::FormatError, "checkpoint dimensions are invalid");
    }
    m.W1 = read_matrix(j["W1"], h1, in, "W1");
    m.b1 = read_vector(j["b1"], static_cast<std::size_t>(h1), "b1");
    m.W2 = read_matrix(j["W2"], h2, h1, "W2");
    m.b2 = read_vector(j["b2"], static_cast<std::size_t>(h2), "b2");
    m.w3 = read_vector(j["w3"], static_cast<std::size_t>(h2), "w3");
    m.b3 = j.value("b3", 0.0);
    m.dropout_rate = j.value("dropout_rate", 0.3);
    m.threshold = j.value("threshold", 0.5);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

void save_checkpoint(const DetectorModel& model, const std::filesystem::path& path) {
  spit(path, checkpoint_to_json(model));
}

DetectorModel load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(slurp(path)); }

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& s : history) {
    out << s.epoch << ',' << s.train_loss << ',' << s.train_accuracy << ',' << s.val_loss << ',' << s.val_accuracy
        << '\n';
  }
  spit(path, out.str());
}

}  // namespace wmtrace::detector
