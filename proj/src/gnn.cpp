/* Copyright 2026 The topicrefine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

	http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "topicrefine/gnn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace topicrefine {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

void GnnConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Config, "gnn: " + what); };
  if (hidden_dim < 1) bad("hidden_dim must be >= 1");
  if (n_layers < 1) bad("n_layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (edge_mlp_hidden < 1) bad("edge_mlp_hidden must be >= 1");
  if (!(layer_norm_eps > 0.0)) bad("layer_norm_eps must be positive");
}

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out{&proj_doc, &bias_doc, &proj_topic, &bias_topic, &proj_word, &bias_word};
  for (auto& l : layers)
    for (Matrix* m : {&l.a1, &l.c1, &l.a2, &l.c2, &l.gamma, &l.beta}) out.push_back(m);
  out.push_back(&head);
  out.push_back(&head_bias);
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  auto mutable_view = const_cast<ModelParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Matrix* m : z.tensors()) m->setZero();
  return z;
}

FeatureDims feature_dims(const HeterogeneousGraph& g) {
  return {static_cast<std::size_t>(g.doc_features.cols()),
          static_cast<std::size_t>(g.topic_features.cols()),
          static_cast<std::size_t>(g.word_features.cols())};
}

ModelParams init_params(const GnnConfig& cfg, const FeatureDims& dims) {
  cfg.validate();
  const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto eh = static_cast<Eigen::Index>(cfg.edge_mlp_hidden);
  Rng rng(cfg.seed);
  auto weight = [&](std::size_t rows, Eigen::Index cols) {
    Matrix m(static_cast<Eigen::Index>(rows), cols);
    xavier_fill(m, rng);
    return m;
  };

  ModelParams p;
  p.proj_doc = weight(dims.doc, h);
  p.bias_doc = Matrix::Zero(1, h);
  p.proj_topic = weight(dims.topic, h);
  p.bias_topic = Matrix::Zero(1, h);
  p.proj_word = weight(dims.word, h);
  p.bias_word = Matrix::Zero(1, h);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    ConvLayerParams layer;
    layer.a1 = weight(kEdgeFeatureDim, eh);
    layer.c1 = Matrix::Zero(1, eh);
    layer.a2 = weight(cfg.edge_mlp_hidden, h * h);
    layer.c2 = Matrix::Zero(1, h * h);
    layer.gamma = Matrix::Ones(1, h);
    layer.beta = Matrix::Zero(1, h);
    p.layers.push_back(std::move(layer));
  }
  p.head = weight(cfg.hidden_dim, static_cast<Eigen::Index>(dims.topic));
  p.head_bias = Matrix::Zero(1, static_cast<Eigen::Index>(dims.topic));
  return p;
}

namespace {

using Index = Eigen::Index;

// k-th slice of the edge network's output layer as an h x h matrix; slice eh is the bias.
Eigen::Map<const Matrix> slice(const ConvLayerParams& layer, Index k, Index h) {
  const double* base = k < layer.a2.rows() ? layer.a2.data() + k * h * h : layer.c2.data();
  return {base, h, h};
}

Eigen::Map<Matrix> slice(ConvLayerParams& layer, Index k, Index h) {
  double* base = k < layer.a2.rows() ? layer.a2.data() + k * h * h : layer.c2.data();
  return {base, h, h};
}

// Coefficient of slice k for edge e: the hidden activation, or 1 for the bias slice.
double coefficient(const Matrix& r1, std::size_t e, Index k) {
  return k < r1.cols() ? r1(static_cast<Index>(e), k) : 1.0;
}

void check_finite(const Matrix& m, const std::string& where) {
  if (!m.allFinite()) fail(ErrorKind::Numeric, "non-finite activations in " + where);
}

Index topic_offset(const HeterogeneousGraph& g) { return static_cast<Index>(g.n_docs()); }

void check_shapes(const HeterogeneousGraph& g, const ModelParams& p, const GnnConfig& cfg) {
  const auto h = static_cast<Index>(cfg.hidden_dim);
  require(p.layers.size() == cfg.n_layers, "parameter layer count differs from config");
  require(p.proj_doc.cols() == h && p.proj_topic.cols() == h && p.proj_word.cols() == h,
          "projection width differs from hidden_dim");
  require(g.n_docs() == 0 || p.proj_doc.rows() == g.doc_features.cols(),
          "document feature dimension differs from parameters");
  require(p.proj_topic.rows() == g.topic_features.cols(),
          "topic feature dimension differs from parameters");
  require(g.n_words() == 0 || p.proj_word.rows() == g.word_features.cols(),
          "word feature dimension differs from parameters");
  require(g.adjacency.size() == g.n_nodes(), "graph adjacency not built");
}

}  // namespace

ForwardCache forward(const HeterogeneousGraph& g, const ModelParams& params,
                     const GnnConfig& cfg, Mode mode, Rng* rng,
                     const std::vector<Matrix>* fixed_masks) {
  check_shapes(g, params, cfg);
  const auto h = static_cast<Index>(cfg.hidden_dim);
  const auto eh = static_cast<Index>(cfg.edge_mlp_hidden);
  const auto n = static_cast<Index>(g.n_nodes());
  const auto n_edges = static_cast<Index>(g.edges.size());
  const bool dropout = mode == Mode::Train && cfg.dropout > 0.0;
  if (dropout && !fixed_masks) require(rng != nullptr, "training forward needs an RNG");
  if (fixed_masks) require(fixed_masks->size() == cfg.n_layers, "one dropout mask per layer");

  ForwardCache cache;
  cache.mode = mode;
  cache.edge_features.resize(n_edges, static_cast<Index>(kEdgeFeatureDim));
  for (Index e = 0; e < n_edges; ++e)
    cache.edge_features.row(e) = edge_feature(g.edges[static_cast<std::size_t>(e)]);

  Matrix hidden(n, h);
  const Index nd = static_cast<Index>(g.n_docs());
  const Index nt = static_cast<Index>(g.n_topics());
  const Index nw = static_cast<Index>(g.n_words());
  if (nd > 0)
    hidden.topRows(nd) = (g.doc_features * params.proj_doc).rowwise() + params.bias_doc.row(0);
  hidden.middleRows(nd, nt) =
      (g.topic_features * params.proj_topic).rowwise() + params.bias_topic.row(0);
  if (nw > 0)
    hidden.bottomRows(nw) = (g.word_features * params.proj_word).rowwise() + params.bias_word.row(0);
  check_finite(hidden, "input projection");

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& layer = params.layers[l];
    const std::string where = "layer " + std::to_string(l + 1);
    LayerCache lc;
    lc.input = hidden;
    lc.z1 = (cache.edge_features * layer.a1).rowwise() + layer.c1.row(0);
    lc.r1 = lc.z1.cwiseMax(0.0);
    lc.projected.resize(static_cast<std::size_t>(eh + 1));
    for (Index k = 0; k <= eh; ++k)
      lc.projected[static_cast<std::size_t>(k)] = lc.input * slice(layer, k, h).transpose();

    // Mean of W_e h_j over neighbours, with W_e h_j = sum_k r1_k(e) (M_k h_j).
    Matrix pre = Matrix::Zero(n, h);
    for (Index i = 0; i < n; ++i) {
      const auto& nbrs = g.adjacency[static_cast<std::size_t>(i)];
      if (nbrs.empty()) continue;
      for (const auto& nb : nbrs)
        for (Index k = 0; k <= eh; ++k)
          pre.row(i) += coefficient(lc.r1, nb.edge, k) *
                        lc.projected[static_cast<std::size_t>(k)].row(static_cast<Index>(nb.node));
      pre.row(i) /= static_cast<double>(nbrs.size());
    }
    if (l >= 1) pre += lc.input;
    check_finite(pre, where);

    lc.xhat.resize(n, h);
    lc.inv_std.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double mu = pre.row(i).mean();
      const double var = (pre.row(i).array() - mu).square().mean();
      lc.inv_std[i] = 1.0 / std::sqrt(var + cfg.layer_norm_eps);
      lc.xhat.row(i) = (pre.row(i).array() - mu) * lc.inv_std[i];
    }
    lc.y = (lc.xhat.array().rowwise() * layer.gamma.row(0).array()).rowwise() +
           layer.beta.row(0).array();
    Matrix activated = lc.y.cwiseMax(0.0);

    if (mode == Mode::Train && fixed_masks) {
      lc.mask = (*fixed_masks)[l];
      require(lc.mask.rows() == n && lc.mask.cols() == h, "dropout mask shape mismatch");
    } else if (dropout) {
      const double keep = 1.0 - cfg.dropout;
      lc.mask.resize(n, h);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < h; ++j) lc.mask(i, j) = rng->uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
    }
    lc.output = lc.mask.size() > 0 ? Matrix(activated.cwiseProduct(lc.mask)) : activated;
    check_finite(lc.output, where);
    hidden = lc.output;
    cache.layers.push_back(std::move(lc));
  }

  cache.refined = (hidden.middleRows(topic_offset(g), nt) * params.head).rowwise() +
                  params.head_bias.row(0);
  check_finite(cache.refined, "output head");
  return cache;
}

double mse_loss(const Matrix& refined, const Matrix& original) {
  require(refined.rows() == original.rows() && refined.cols() == original.cols(),
          "refined and original embeddings differ in shape");
  require(refined.rows() > 0, "loss over zero topics");
  return (refined - original).squaredNorm() / static_cast<double>(refined.rows());
}

ModelParams backward(const HeterogeneousGraph& g, const ModelParams& params,
                     const GnnConfig& cfg, const ForwardCache& cache) {
  check_shapes(g, params, cfg);
  const auto h = static_cast<Index>(cfg.hidden_dim);
  const auto eh = static_cast<Index>(cfg.edge_mlp_hidden);
  const auto n = static_cast<Index>(g.n_nodes());
  const Index nd = static_cast<Index>(g.n_docs());
  const Index nt = static_cast<Index>(g.n_topics());
  const Index nw = static_cast<Index>(g.n_words());
  require(cache.layers.size() == cfg.n_layers, "forward cache does not match config");

  ModelParams grads = params.zeros_like();
  const Matrix d_refined =
      (cache.refined - g.topic_features) * (2.0 / static_cast<double>(nt));
  const Matrix& last = cache.layers.back().output;
  grads.head = last.middleRows(nd, nt).transpose() * d_refined;
  grads.head_bias = d_refined.colwise().sum();
  Matrix d_hidden = Matrix::Zero(n, h);
  d_hidden.middleRows(nd, nt) = d_refined * params.head.transpose();

  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const auto& lc = cache.layers[l];
    const auto& layer = params.layers[l];
    auto& gl = grads.layers[l];

    Matrix d_act = lc.mask.size() > 0 ? Matrix(d_hidden.cwiseProduct(lc.mask)) : d_hidden;
    const Matrix d_y = d_act.array() * (lc.y.array() > 0.0).cast<double>();
    gl.gamma = d_y.cwiseProduct(lc.xhat).colwise().sum();
    gl.beta = d_y.colwise().sum();

    Matrix d_pre(n, h);
    const double hd = static_cast<double>(h);
    for (Index i = 0; i < n; ++i) {
      const RowVector dx = d_y.row(i).cwiseProduct(layer.gamma.row(0));
      const double sum_dx = dx.sum();
      const double sum_dx_xhat = dx.dot(lc.xhat.row(i));
      d_pre.row(i) = (lc.inv_std[i] / hd) *
                     (hd * dx.array() - sum_dx - lc.xhat.row(i).array() * sum_dx_xhat).matrix();
    }

    Matrix d_input = l >= 1 ? d_pre : Matrix(Matrix::Zero(n, h));
    std::vector<Matrix> d_projected(static_cast<std::size_t>(eh + 1), Matrix::Zero(n, h));
    Matrix d_r1 = Matrix::Zero(lc.r1.rows(), lc.r1.cols());
    for (Index i = 0; i < n; ++i) {
      const auto& nbrs = g.adjacency[static_cast<std::size_t>(i)];
      if (nbrs.empty()) continue;
      const RowVector gi = d_pre.row(i) / static_cast<double>(nbrs.size());
      for (const auto& nb : nbrs) {
        const auto j = static_cast<Index>(nb.node);
        for (Index k = 0; k <= eh; ++k) {
          const auto ks = static_cast<std::size_t>(k);
          d_projected[ks].row(j) += coefficient(lc.r1, nb.edge, k) * gi;
          if (k < eh) d_r1(static_cast<Index>(nb.edge), k) += gi.dot(lc.projected[ks].row(j));
        }
      }
    }
    for (Index k = 0; k <= eh; ++k) {
      const auto& dp = d_projected[static_cast<std::size_t>(k)];
      slice(gl, k, h) = dp.transpose() * lc.input;
      d_input += dp * slice(layer, k, h);
    }
    const Matrix d_z1 = d_r1.array() * (lc.z1.array() > 0.0).cast<double>();
    gl.a1 = cache.edge_features.transpose() * d_z1;
    gl.c1 = d_z1.colwise().sum();
    d_hidden = std::move(d_input);
  }

  if (nd > 0) {
    grads.proj_doc = g.doc_features.transpose() * d_hidden.topRows(nd);
    grads.bias_doc = d_hidden.topRows(nd).colwise().sum();
  }
  grads.proj_topic = g.topic_features.transpose() * d_hidden.middleRows(nd, nt);
  grads.bias_topic = d_hidden.middleRows(nd, nt).colwise().sum();
  if (nw > 0) {
    grads.proj_word = g.word_features.transpose() * d_hidden.bottomRows(nw);
    grads.bias_word = d_hidden.bottomRows(nw).colwise().sum();
  }
  return grads;
}

AdamState init_adam(const ModelParams& params) {
  AdamState s;
  for (const Matrix* m : params.tensors()) {
    s.m.push_back(Matrix::Zero(m->rows(), m->cols()));
    s.v.push_back(Matrix::Zero(m->rows(), m->cols()));
  }
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  auto p = params.tensors();
  auto g = grads.tensors();
  require(p.size() == g.size() && p.size() == state.m.size(), "Adam state does not match params");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * *g[i];
    v = state.beta2 * v + (1.0 - state.beta2) * g[i]->cwiseProduct(*g[i]);
    p[i]->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

TrainResult train(const HeterogeneousGraph& g, const GnnConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  result.report.seed = cfg.seed;
  result.params = init_params(cfg, feature_dims(g));
  // Parameters and dropout masks draw from separate streams of the same seed.
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState adam = init_adam(result.params);

  try {
    result.report.initial_loss =
        mse_loss(forward(g, result.params, cfg, Mode::Eval).refined, g.topic_features);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Numeric) throw;
    throw DivergenceError(std::string(e.what()) + " (initial evaluation)", result.report);
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      const ForwardCache cache = forward(g, result.params, cfg, Mode::Train, &dropout_rng);
      const double loss = mse_loss(cache.refined, g.topic_features);
      if (!std::isfinite(loss)) fail(ErrorKind::Numeric, "non-finite loss");
      result.report.loss_per_epoch.push_back(loss);
      if (on_epoch) on_epoch(epoch, loss);
      adam_step(result.params, backward(g, result.params, cfg, cache), adam, cfg.lr);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1),
                            result.report);
    }
  }

  try {
    result.refined = forward(g, result.params, cfg, Mode::Eval).refined;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Numeric) throw;
    throw DivergenceError(std::string(e.what()) + " (final evaluation)", result.report);
  }
  result.report.final_loss = mse_loss(result.refined, g.topic_features);
  return result;
}

json to_json(const GnnConfig& cfg) {
  return {{"hidden_dim", cfg.hidden_dim}, {"n_layers", cfg.n_layers},
          {"dropout", cfg.dropout},       {"lr", cfg.lr},
          {"epochs", cfg.epochs},         {"edge_mlp_hidden", cfg.edge_mlp_hidden},
          {"seed", cfg.seed},             {"layer_norm_eps", cfg.layer_norm_eps}};
}

GnnConfig gnn_config_from_json(const json& j) {
  try {
    GnnConfig cfg;
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.n_layers = j.at("n_layers").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.lr = j.at("lr").get<double>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.edge_mlp_hidden = j.at("edge_mlp_hidden").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("gnn config: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const GnnConfig& cfg, const json& extra) {
  json shapes = json::array();
  for (const Matrix* m : params.tensors()) shapes.push_back({m->rows(), m->cols()});
  const json header = {{"format", "topicrefine-gnn"},
                       {"version", 1},
                       {"config", to_json(cfg)},
                       {"dims",
                        {{"doc", params.proj_doc.rows()},
                         {"topic", params.proj_topic.rows()},
                         {"word", params.proj_word.rows()}}},
                       {"shapes", std::move(shapes)},
                       {"parameter_count", params.parameter_count()},
                       {"extra", extra}};
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  for (const Matrix* m : params.tensors())
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": bad checkpoint header: " + e.what());
  }
  Checkpoint ck;
  try {
    if (header.at("format") != "topicrefine-gnn" || header.at("version") != 1)
      fail(ErrorKind::Schema, path.string() + ": not a checkpoint of a supported version");
    ck.cfg = gnn_config_from_json(header.at("config"));
    const auto& dims = header.at("dims");
    ck.params = init_params(ck.cfg, {dims.at("doc").get<std::size_t>(),
                                     dims.at("topic").get<std::size_t>(),
                                     dims.at("word").get<std::size_t>()});
    const auto& shapes = header.at("shapes");
    auto tensors = ck.params.tensors();
    if (shapes.size() != tensors.size()) fail(ErrorKind::Schema, "checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (shapes[i][0].get<Index>() != tensors[i]->rows() ||
          shapes[i][1].get<Index>() != tensors[i]->cols())
        fail(ErrorKind::Schema, "checkpoint tensor " + std::to_string(i) + " has the wrong shape");
    ck.extra = header.value("extra", json::object());
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, path.string() + ": " + e.what());
  }
  for (Matrix* m : ck.params.tensors()) {
    in.read(reinterpret_cast<char*>(m->data()),
            static_cast<std::streamsize>(m->size() * sizeof(double)));
    if (!in) fail(ErrorKind::Schema, path.string() + ": truncated parameter blob");
  }
  if (in.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::Schema, path.string() + ": trailing bytes after parameters");
  return ck;
}

void write_loss_csv(std::ostream& out, const TrainReport& report) {
  const auto old_precision = out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < report.loss_per_epoch.size(); ++e)
    out << e + 1 << ',' << report.loss_per_epoch[e] << '\n';
  out.precision(old_precision);
}

}  // namespace topicrefine
