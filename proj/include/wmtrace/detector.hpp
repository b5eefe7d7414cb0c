#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wmtrace::detector {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct EmbeddingPair {
  std::string id;
  Vector e_img;
  Vector e_txt;
  std::optional<int> label;  // 1 = harmful
  std::string text;

  int dim() const { return static_cast<int>(e_img.size()); }
};

// e / ||e||; throws DegenerateEmbedding when ||e|| <= 1e-12.
Vector normalize(const Vector& e);

// z = [u ; v ; u - v ; u ⊙ v ; <u, v>] for u, v the normalized embeddings.
Vector fuse(const EmbeddingPair& pair);
inline int fused_dim(int d) { return 4 * d + 1; }

/// Two hidden ReLU layers, dropout after each in training mode only
/// (inverted scaling), and a sigmoid output unit.
struct DetectorModel {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  Vector w3;
  double b3 = 0.0;
  double dropout_rate = 0.3;
  double threshold = 0.5;

  static DetectorModel zeros(int input_dim, int hidden1 = 512, int hidden2 = 128);

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden1() const { return static_cast<int>(W1.rows()); }
  int hidden2() const { return static_cast<int>(W2.rows()); }
  int embed_dim() const { return (input_dim() - 1) / 4; }

  // ShapeError on inconsistent shapes, InvalidArgument on non-finite values
  // or a threshold outside (0, 1).
  void validate() const;
};

// Portable uniform generator: results do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

struct ForwardResult {
  double p = 0.5;
  double logit = 0.0;
  Vector h1;
  Vector h2;
};

double sigmoid(double x);

// `rng` is only used (and required) when train_mode is set and dropout > 0.
ForwardResult forward(const DetectorModel& model, const Vector& z, bool train_mode = false, Rng* rng = nullptr);

struct Classification {
  double p = 0.5;
  int label = 0;
};

Classification classify(const DetectorModel& model, const EmbeddingPair& pair);

inline constexpr double kProbClip = 1e-7;

// Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, std::span<const int> labels);

struct Gradients {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  Vector w3;
  double b3 = 0.0;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grad;
};

// Mean BCE over the rows of `inputs` and its gradient w.r.t. every parameter.
// With `dropout_rng` null the network runs in eval mode. The output-layer
// gradient is p - y, i.e. the gradient of the unclipped loss.
LossAndGradients loss_and_gradients(const DetectorModel& model, const Matrix& inputs, const Vector& labels,
                                    Rng* dropout_rng = nullptr);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t rng_seed = 0;
  double validation_fraction = 0.2;
  int hidden1 = 512;
  int hidden2 = 128;
  double dropout_rate = 0.3;
  double threshold = 0.5;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  DetectorModel model;  // parameters from the epoch with the lowest validation loss
  std::vector<EpochStats> history;
  int best_epoch = 0;
  std::vector<std::size_t> validation_indices;
};

TrainResult train(const std::vector<EmbeddingPair>& dataset, const TrainConfig& cfg);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double auc = 0.0;
  std::size_t count = 0;
};

// Mann-Whitney AUC, ties counted half. DegenerateDataset if one class is absent.
double auc_roc(std::span<const double> scores, std::span<const int> labels);
Metrics metrics_from_scores(std::span<const double> scores, std::span<const int> labels, double threshold);
Metrics evaluate(const DetectorModel& model, const std::vector<EmbeddingPair>& dataset);

// ---- file formats ----------------------------------------------------------

// One JSON object per line:
// {"id", "label": 0|1|null, "dim", "e_img": [...], "e_txt": [...], "text"?}
EmbeddingPair parse_embedding_record(const std::string& line);
std::vector<EmbeddingPair> load_jsonl(const std::filesystem::path& path);
std::string to_jsonl_record(const EmbeddingPair& pair);
void save_jsonl(const std::vector<EmbeddingPair>& data, const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const DetectorModel& model);
DetectorModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path);

}  // namespace wmtrace::detector
