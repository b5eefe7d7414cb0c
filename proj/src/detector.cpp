#include "wmtrace/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "wmtrace/error.hpp"

namespace wmtrace::detector {
namespace {

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 - rate;
  // Column-major fill order, fixed so that seeded runs repeat exactly.
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
}

struct Batch {
  Matrix inputs;  // one fused vector per row
  Vector labels;
};

Batch make_batch(const std::vector<Vector>& fused, const std::vector<int>& labels,
                 std::span<const std::size_t> idx) {
  Batch b{Matrix(static_cast<Eigen::Index>(idx.size()), fused.front().size()),
          Vector(static_cast<Eigen::Index>(idx.size()))};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    b.inputs.row(static_cast<Eigen::Index>(i)) = fused[idx[i]].transpose();
    b.labels(static_cast<Eigen::Index>(i)) = labels[idx[i]];
  }
  return b;
}

Vector batch_probs(const DetectorModel& m, const Matrix& inputs) {
  const Matrix a1 = relu((inputs * m.W1.transpose()).rowwise() + m.b1.transpose());
  const Matrix a2 = relu((a1 * m.W2.transpose()).rowwise() + m.b2.transpose());
  Vector o = (a2 * m.w3).array() + m.b3;
  return o.unaryExpr([](double x) { return sigmoid(x); });
}

// Adam state for one parameter block.
struct Moments {
  Matrix m, v;
};

void adam_step(Matrix& param, const Matrix& grad, Moments& s, double lr, double bc1, double bc2) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  s.m = b1 * s.m + (1.0 - b1) * grad;
  s.v = b2 * s.v + (1.0 - b2) * grad.cwiseProduct(grad);
  param.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + eps);
}

double accuracy_of(const Vector& probs, const Vector& labels, double threshold) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) hits += ((probs(i) >= threshold) == (labels(i) > 0.5));
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double batch_loss(const Vector& probs, const Vector& labels) {
  std::vector<double> p(probs.data(), probs.data() + probs.size());
  std::vector<int> y(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) y[i] = labels(i) > 0.5 ? 1 : 0;
  return bce_loss(p, y);
}

}  // namespace

Vector normalize(const Vector& e) {
  const double n = e.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::DegenerateEmbedding, "embedding norm is (near) zero");
  return e / n;
}

Vector fuse(const EmbeddingPair& pair) {
  if (pair.e_img.size() == 0 || pair.e_img.size() != pair.e_txt.size()) {
    throw Error(ErrorCode::ShapeError, "image and text embeddings must share a positive dimension");
  }
  if (!pair.e_img.allFinite() || !pair.e_txt.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "embedding contains NaN or Inf");
  }
  const Vector u = normalize(pair.e_img);
  const Vector v = normalize(pair.e_txt);
  const Eigen::Index d = u.size();
  Vector z(4 * d + 1);
  z.segment(0, d) = u;
  z.segment(d, d) = v;
  z.segment(2 * d, d) = u - v;
  z.segment(3 * d, d) = u.cwiseProduct(v);
  z(4 * d) = std::clamp(u.dot(v), -1.0, 1.0);
  return z;
}

DetectorModel DetectorModel::zeros(int input_dim, int hidden1, int hidden2) {
  DetectorModel m;
  m.W1 = Matrix::Zero(hidden1, input_dim);
  m.b1 = Vector::Zero(hidden1);
  m.W2 = Matrix::Zero(hidden2, hidden1);
  m.b2 = Vector::Zero(hidden2);
  m.w3 = Vector::Zero(hidden2);
  return m;
}

void DetectorModel::validate() const {
  if (W1.rows() == 0 || W1.cols() == 0 || b1.size() != W1.rows() || W2.cols() != W1.rows() ||
      b2.size() != W2.rows() || w3.size() != W2.rows()) {
    throw Error(ErrorCode::ShapeError, "detector parameter shapes are inconsistent");
  }
  if (!W1.allFinite() || !b1.allFinite() || !W2.allFinite() || !b2.allFinite() || !w3.allFinite() ||
      !std::isfinite(b3)) {
    throw Error(ErrorCode::InvalidArgument, "detector parameters must be finite");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be in (0, 1)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout rate must be in [0, 1)");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ForwardResult forward(const DetectorModel& model, const Vector& z, bool train_mode, Rng* rng) {
  if (z.size() != model.input_dim()) {
    throw Error(ErrorCode::ShapeError, "fused vector has " + std::to_string(z.size()) + " components, model expects " +
                                           std::to_string(model.input_dim()));
  }
  const bool drop = train_mode && model.dropout_rate > 0.0;
  if (drop && rng == nullptr) throw Error(ErrorCode::InvalidArgument, "training-mode forward needs an rng");

  ForwardResult r;
  r.h1 = (model.W1 * z + model.b1).cwiseMax(0.0);
  if (drop) r.h1 = r.h1.cwiseProduct(dropout_mask(r.h1.size(), 1, model.dropout_rate, *rng));
  r.h2 = (model.W2 * r.h1 + model.b2).cwiseMax(0.0);
  if (drop) r.h2 = r.h2.cwiseProduct(dropout_mask(r.h2.size(), 1, model.dropout_rate, *rng));
  r.logit = model.w3.dot(r.h2) + model.b3;
  r.p = sigmoid(r.logit);
  return r;
}

Classification classify(const DetectorModel& model, const EmbeddingPair& pair) {
  const ForwardResult r = forward(model, fuse(pair));
  return Classification{r.p, r.p >= model.threshold ? 1 : 0};
}

double bce_loss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::ShapeError, "probabilities and labels differ in length");
  if (probs.empty()) throw Error(ErrorCode::EmptyBatch, "BCE over an empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
    acc += labels[i] ? -std::log(p) : -std::log1p(-p);
  }
  return acc / static_cast<double>(probs.size());
}

LossAndGradients loss_and_gradients(const DetectorModel& m, const Matrix& inputs, const Vector& labels,
                                    Rng* dropout_rng) {
  if (inputs.cols() != m.input_dim() || inputs.rows() != labels.size()) {
    throw Error(ErrorCode::ShapeError, "batch shape does not match the model");
  }
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyBatch, "empty batch");
  const double n = static_cast<double>(inputs.rows());
  const bool drop = dropout_rng != nullptr && m.dropout_rate > 0.0;

  const Matrix pre1 = (inputs * m.W1.transpose()).rowwise() + m.b1.transpose();
  Matrix a1 = relu(pre1);
  Matrix mask1, mask2;
  if (drop) {
    mask1 = dropout_mask(a1.rows(), a1.cols(), m.dropout_rate, *dropout_rng);
    a1 = a1.cwiseProduct(mask1);
  }
  const Matrix pre2 = (a1 * m.W2.transpose()).rowwise() + m.b2.transpose();
  Matrix a2 = relu(pre2);
  if (drop) {
    mask2 = dropout_mask(a2.rows(), a2.cols(), m.dropout_rate, *dropout_rng);
    a2 = a2.cwiseProduct(mask2);
  }
  const Vector logits = (a2 * m.w3).array() + m.b3;
  const Vector probs = logits.unaryExpr([](double x) { return sigmoid(x); });

  LossAndGradients out;
  out.loss = batch_loss(probs, labels);

  const Vector d_logit = (probs - labels) / n;
  Gradients& g = out.grad;
  g.w3 = a2.transpose() * d_logit;
  g.b3 = d_logit.sum();

  Matrix d_pre2 = d_logit * m.w3.transpose();
  if (drop) d_pre2 = d_pre2.cwiseProduct(mask2);
  d_pre2 = d_pre2.cwiseProduct((pre2.array() > 0.0).cast<double>().matrix());
  g.W2 = d_pre2.transpose() * a1;
  g.b2 = d_pre2.colwise().sum().transpose();

  Matrix d_pre1 = d_pre2 * m.W2;
  if (drop) d_pre1 = d_pre1.cwiseProduct(mask1);
  d_pre1 = d_pre1.cwiseProduct((pre1.array() > 0.0).cast<double>().matrix());
  g.W1 = d_pre1.transpose() * inputs;
  g.b1 = d_pre1.colwise().sum().transpose();
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (epochs < 1 || batch_size < 1 || hidden1 < 1 || hidden2 < 1) {
    throw Error(ErrorCode::InvalidArgument, "epochs, batch size and hidden widths must be positive");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation fraction must be in (0, 1)");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorCode::InvalidArgument, "bad dropout rate");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "bad threshold");
}

TrainResult train(const std::vector<EmbeddingPair>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<Vector> fused;
  std::vector<int> labels;
  std::array<std::vector<std::size_t>, 2> by_class;
  fused.reserve(dataset.size());
  for (const auto& pair : dataset) {
    if (!pair.label || (*pair.label != 0 && *pair.label != 1)) {
      throw Error(ErrorCode::InvalidArgument, "training sample '" + pair.id + "' needs a 0/1 label");
    }
    by_class[*pair.label].push_back(fused.size());
    labels.push_back(*pair.label);
    fused.push_back(fuse(pair));
  }
  if (by_class[0].size() < 2 || by_class[1].size() < 2) {
    throw Error(ErrorCode::DegenerateDataset, "training needs at least two samples of each class");
  }

  Rng rng(cfg.rng_seed);
  auto shuffle = [&rng](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };

  // Stratified split: each class contributes the same fraction to validation.
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& members : by_class) {
    shuffle(members);
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(members.size()))), 1,
        members.size() - 1);
    val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  const int input_dim = static_cast<int>(fused.front().size());
  DetectorModel model = DetectorModel::zeros(input_dim, cfg.hidden1, cfg.hidden2);
  model.dropout_rate = cfg.dropout_rate;
  model.threshold = cfg.threshold;
  glorot(model.W1, rng);
  glorot(model.W2, rng);
  {
    Matrix w3(1, cfg.hidden2);
    glorot(w3, rng);
    model.w3 = w3.transpose();
  }

  Moments sW1{Matrix::Zero(model.W1.rows(), model.W1.cols()), Matrix::Zero(model.W1.rows(), model.W1.cols())};
  Moments sW2{Matrix::Zero(model.W2.rows(), model.W2.cols()), Matrix::Zero(model.W2.rows(), model.W2.cols())};
  Moments sb1{Matrix::Zero(model.b1.size(), 1), Matrix::Zero(model.b1.size(), 1)};
  Moments sb2{Matrix::Zero(model.b2.size(), 1), Matrix::Zero(model.b2.size(), 1)};
  Moments sw3{Matrix::Zero(model.w3.size(), 1), Matrix::Zero(model.w3.size(), 1)};
  Moments sb3{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};

  const Batch train_all = make_batch(fused, labels, train_idx);
  const Batch val_all = make_batch(fused, labels, val_idx);

  TrainResult result;
  result.validation_indices = val_idx;
  double best_val = std::numeric_limits<double>::infinity();
  long step = 0;
  std::vector<std::size_t> order = train_idx;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Batch batch = make_batch(fused, labels, std::span(order).subspan(start, end - start));
      const LossAndGradients lg = loss_and_gradients(model, batch.inputs, batch.labels, &rng);

      ++step;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step));
      const double lr = cfg.learning_rate;
      adam_step(model.W1, lg.grad.W1, sW1, lr, bc1, bc2);
      adam_step(model.W2, lg.grad.W2, sW2, lr, bc1, bc2);
      Matrix b1 = model.b1, b2 = model.b2, w3 = model.w3, b3 = Matrix::Constant(1, 1, model.b3);
      adam_step(b1, lg.grad.b1, sb1, lr, bc1, bc2);
      adam_step(b2, lg.grad.b2, sb2, lr, bc1, bc2);
      adam_step(w3, lg.grad.w3, sw3, lr, bc1, bc2);
      adam_step(b3, Matrix::Constant(1, 1, lg.grad.b3), sb3, lr, bc1, bc2);
      model.b1 = b1;
      model.b2 = b2;
      model.w3 = w3;
      model.b3 = b3(0, 0);
    }

    const Vector p_train = batch_probs(model, train_all.inputs);
    const Vector p_val = batch_probs(model, val_all.inputs);
    EpochStats s;
    s.epoch = epoch;
    s.train_loss = batch_loss(p_train, train_all.labels);
    s.train_accuracy = accuracy_of(p_train, train_all.labels, model.threshold);
    s.val_loss = batch_loss(p_val, val_all.labels);
    s.val_accuracy = accuracy_of(p_val, val_all.labels, model.threshold);
    result.history.push_back(s);
    if (s.val_loss < best_val) {
      best_val = s.val_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeError, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::DegenerateDataset, "AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

Metrics metrics_from_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  Metrics m;
  m.auc = auc_roc(scores, labels);
  m.count = scores.size();
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    else if (pred) ++fp;
    else if (labels[i]) ++fn;
    else ++tn;
  }
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(m.count);
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return m;
}

Metrics evaluate(const DetectorModel& model, const std::vector<EmbeddingPair>& dataset) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(dataset.size());
  for (const auto& pair : dataset) {
    if (!pair.label) throw Error(ErrorCode::InvalidArgument, "evaluation sample '" + pair.id + "' has no label");
    scores.push_back(classify(model, pair).p);
    labels.push_back(*pair.label);
  }
  return metrics_from_scores(scores, labels, model.threshold);
}

}  // namespace wmtrace::detector
