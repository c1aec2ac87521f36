#include "scotrl/policy.hpp"

#include "scotrl/math.hpp"
#include "scotrl/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace scotrl {

using json = nlohmann::json;

void PolicyGrad::zero() {
  emb.setZero();
  q_ctx.setZero();
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  w3.setZero();
  b3.setZero();
}

double PolicyGrad::squared_norm() const {
  return emb.squaredNorm() + q_ctx.squaredNorm() + w1.squaredNorm() + b1.squaredNorm() +
         w2.squaredNorm() + b2.squaredNorm() + w3.squaredNorm() + b3.squaredNorm();
}

template <class T>
static std::vector<TensorRef> refs_impl(T& t) {
  return {
      {"emb", t.emb.data(), t.emb.size()},     {"q_ctx", t.q_ctx.data(), t.q_ctx.size()},
      {"w1", t.w1.data(), t.w1.size()},        {"b1", t.b1.data(), t.b1.size()},
      {"w2", t.w2.data(), t.w2.size()},        {"b2", t.b2.data(), t.b2.size()},
      {"w3", t.w3.data(), t.w3.size()},        {"b3", t.b3.data(), t.b3.size()},
  };
}

std::vector<TensorRef> tensor_refs(PolicyParams& p) { return refs_impl(p); }
std::vector<TensorRef> tensor_refs(PolicyGrad& g) { return refs_impl(g); }

static void shape_tensors(PolicyParams& p) {
  const int in = (p.k + 1 + kPromptRegions) * p.d;
  p.emb = Mat::Zero(p.v, p.d);
  p.q_ctx = Vec::Zero(p.d);
  p.w1 = Mat::Zero(p.dh, in);
  p.b1 = Vec::Zero(p.dh);
  p.w2 = Mat::Zero(p.dh, p.dh);
  p.b2 = Vec::Zero(p.dh);
  p.w3 = Mat::Zero(p.v, p.dh);
  p.b3 = Vec::Zero(p.v);
}

PolicyParams zero_params(int v, int d, int dh, int k) {
  if (v < 2 || d < 1 || dh < 1 || k < 1) throw InvariantError("policy: bad shape");
  PolicyParams p;
  p.v = v;
  p.d = d;
  p.dh = dh;
  p.k = k;
  shape_tensors(p);
  return p;
}

PolicyParams random_params(int v, int d, int dh, int k, std::uint64_t seed) {
  PolicyParams p = zero_params(v, d, dh, k);
  Rng rng(seed);
  const double emb_scale = 0.5;
  const double s1 = 1.0 / std::sqrt(static_cast<double>((k + 1 + kPromptRegions) * d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(dh));
  for (Eigen::Index i = 0; i < p.emb.size(); ++i) p.emb.data()[i] = emb_scale * rng.normal();
  for (Eigen::Index i = 0; i < p.q_ctx.size(); ++i) p.q_ctx.data()[i] = 0.1 * rng.normal();
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = s1 * rng.normal();
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = s2 * rng.normal();
  for (Eigen::Index i = 0; i < p.w3.size(); ++i) p.w3.data()[i] = s2 * rng.normal();
  return p;
}

PolicyGrad zero_grad_like(const PolicyParams& p) {
  PolicyGrad g;
  g.emb = Mat::Zero(p.emb.rows(), p.emb.cols());
  g.q_ctx = Vec::Zero(p.q_ctx.size());
  g.w1 = Mat::Zero(p.w1.rows(), p.w1.cols());
  g.b1 = Vec::Zero(p.b1.size());
  g.w2 = Mat::Zero(p.w2.rows(), p.w2.cols());
  g.b2 = Vec::Zero(p.b2.size());
  g.w3 = Mat::Zero(p.w3.rows(), p.w3.cols());
  g.b3 = Vec::Zero(p.b3.size());
  return g;
}

double positional_sign(int j, int i) {
  const std::uint64_t h = splitmix64(mix_seed(0x705e5, static_cast<std::uint64_t>(j),
                                              static_cast<std::uint64_t>(i)));
  return (h & 1ULL) ? 1.0 : -1.0;
}

static void check_regions(const EncodedPrompt& prompt) {
  if (static_cast<int>(prompt.regions.size()) > kPromptRegions)
    throw InvariantError("prompt_features: more regions than feature slots");
  const int n = static_cast<int>(prompt.tokens.size());
  for (const Span& s : prompt.regions) {
    if (s.begin < 0 || s.end < s.begin || s.end > n)
      throw InvariantError("prompt_features: region out of range");
  }
}

Mat prompt_features(const PolicyParams& p, const EncodedPrompt& prompt) {
  check_regions(prompt);
  Mat feats = Mat::Zero(p.d, kPromptRegions);
  for (size_t r = 0; r < prompt.regions.size(); ++r) {
    const Span& s = prompt.regions[r];
    if (s.empty()) continue;
    for (int j = s.begin; j < s.end; ++j) {
      const TokenId tok = prompt.tokens[static_cast<size_t>(j)];
      if (tok < 0 || tok >= p.v) throw InvariantError("prompt_features: token out of vocabulary");
      for (int i = 0; i < p.d; ++i)
        feats(i, static_cast<Eigen::Index>(r)) += positional_sign(j - s.begin, i) * p.emb(tok, i);
    }
    feats.col(static_cast<Eigen::Index>(r)) /= std::sqrt(static_cast<double>(s.len()));
  }
  return feats;
}

Vec policy_forward(const PolicyParams& p, const TokenSeq& history, const Mat& feats,
                   FwdCache* cache) {
  if (feats.rows() != p.d || feats.cols() != kPromptRegions)
    throw InvariantError("policy_forward: feature bank has wrong shape");

  TokenSeq ctx(static_cast<size_t>(p.k), 0);
  const int n = static_cast<int>(history.size());
  for (int i = 0; i < p.k; ++i) {
    const int src = n - p.k + i;
    if (src >= 0) ctx[static_cast<size_t>(i)] = history[static_cast<size_t>(src)];
  }

  Vec x(static_cast<Eigen::Index>(p.k + 1 + kPromptRegions) * p.d);
  for (int i = 0; i < p.k; ++i) {
    const TokenId tok = ctx[static_cast<size_t>(i)];
    if (tok < 0 || tok >= p.v) throw InvariantError("policy_forward: token out of vocabulary");
    x.segment(static_cast<Eigen::Index>(i) * p.d, p.d) = p.emb.row(tok).transpose();
  }
  x.segment(static_cast<Eigen::Index>(p.k) * p.d, p.d) = p.q_ctx;
  for (int r = 0; r < kPromptRegions; ++r)
    x.segment(static_cast<Eigen::Index>(p.k + 1 + r) * p.d, p.d) = feats.col(r);

  Vec h1 = (p.w1 * x + p.b1).array().tanh();
  Vec h2 = (p.w2 * h1 + p.b2).array().tanh();
  Vec prob = softmax(p.w3 * h2 + p.b3);

  if (cache != nullptr) {
    cache->ctx = std::move(ctx);
    cache->x = std::move(x);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->p = prob;
  }
  return prob;
}

void policy_backward(const PolicyParams& p, const FwdCache& cache, TokenId realized, double coeff,
                     PolicyGrad& grad, Mat& dfeats) {
  if (realized < 0 || realized >= p.v) throw InvariantError("policy_backward: bad realized token");

  // d log softmax(z)_realized / dz = onehot - p
  Vec dz = -coeff * cache.p;
  dz(realized) += coeff;

  grad.b3 += dz;
  grad.w3 += dz * cache.h2.transpose();

  Vec dh2 = p.w3.transpose() * dz;
  Vec da2 = dh2.array() * (1.0 - cache.h2.array().square());
  grad.b2 += da2;
  grad.w2 += da2 * cache.h1.transpose();

  Vec dh1 = p.w2.transpose() * da2;
  Vec da1 = dh1.array() * (1.0 - cache.h1.array().square());
  grad.b1 += da1;
  grad.w1 += da1 * cache.x.transpose();

  Vec dx = p.w1.transpose() * da1;
  for (int i = 0; i < p.k; ++i)
    grad.emb.row(cache.ctx[static_cast<size_t>(i)]) +=
        dx.segment(static_cast<Eigen::Index>(i) * p.d, p.d).transpose();
  grad.q_ctx += dx.segment(static_cast<Eigen::Index>(p.k) * p.d, p.d);
  for (int r = 0; r < kPromptRegions; ++r)
    dfeats.col(r) += dx.segment(static_cast<Eigen::Index>(p.k + 1 + r) * p.d, p.d);
}

void scatter_prompt_grad(const PolicyParams& p, const EncodedPrompt& prompt, const Mat& dfeats,
                         PolicyGrad& grad) {
  check_regions(prompt);
  if (dfeats.rows() != p.d || dfeats.cols() != kPromptRegions)
    throw InvariantError("scatter_prompt_grad: feature grad has wrong shape");
  for (size_t r = 0; r < prompt.regions.size(); ++r) {
    const Span& s = prompt.regions[r];
    if (s.empty()) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.len()));
    for (int j = s.begin; j < s.end; ++j) {
      const TokenId tok = prompt.tokens[static_cast<size_t>(j)];
      for (int i = 0; i < p.d; ++i)
        grad.emb(tok, i) +=
            scale * positional_sign(j - s.begin, i) * dfeats(i, static_cast<Eigen::Index>(r));
    }
  }
}

SampleGroup sample_group(const PolicyParams& p, const std::string& prompt_id,
                         const EncodedPrompt& prompt, const VocabSpec& vocab, int g, int max_len,
                         std::uint64_t seed) {
  if (g < 2) throw InvariantError("sample_group: group size must be >= 2");
  if (max_len < 1) throw InvariantError("sample_group: max_len must be >= 1");
  if (vocab.v != p.v) throw InvariantError("sample_group: vocabulary size mismatch");

  const Mat feats = prompt_features(p, prompt);
  SampleGroup group;
  group.prompt_id = prompt_id;
  group.members.reserve(static_cast<size_t>(g));

  for (int m = 0; m < g; ++m) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(m), 0x5a111e));
    StructuredTrajectory traj;
    traj.prompt_id = prompt_id;
    TokenSeq history = prompt.tokens;
    for (int t = 0; t < max_len; ++t) {
      Vec prob = policy_forward(p, history, feats);
      const int tok = rng.categorical(prob);
      traj.tokens.push_back(tok);
      traj.dists.push_back(std::move(prob));
      history.push_back(tok);
      if (tok == vocab.ans_close) break;
    }
    traj.seg = segment(traj.tokens, vocab);
    group.members.push_back(std::move(traj));
  }
  return group;
}

StructuredTrajectory greedy_decode(const PolicyParams& p, const std::string& prompt_id,
                                   const EncodedPrompt& prompt, const VocabSpec& vocab,
                                   int max_len) {
  const Mat feats = prompt_features(p, prompt);
  StructuredTrajectory traj;
  traj.prompt_id = prompt_id;
  TokenSeq history = prompt.tokens;
  for (int t = 0; t < max_len; ++t) {
    Vec prob = policy_forward(p, history, feats);
    Eigen::Index tok = 0;
    prob.maxCoeff(&tok);
    traj.tokens.push_back(static_cast<TokenId>(tok));
    traj.dists.push_back(std::move(prob));
    history.push_back(static_cast<TokenId>(tok));
    if (traj.tokens.back() == vocab.ans_close) break;
  }
  traj.seg = segment(traj.tokens, vocab);
  return traj;
}

void SgdMomentum::init(const PolicyParams& p) { vel = zero_grad_like(p); }

void SgdMomentum::step(PolicyParams& p, const PolicyGrad& grad) {
  auto pv = tensor_refs(p);
  PolicyGrad& v = vel;
  auto vv = tensor_refs(v);
  PolicyGrad g_copy;  // tensor_refs needs mutable; copy is minor next to the matmuls
  g_copy = grad;
  auto gv = tensor_refs(g_copy);
  for (size_t i = 0; i < pv.size(); ++i) {
    if (pv[i].size != vv[i].size || pv[i].size != gv[i].size)
      throw InvariantError("SgdMomentum: shape mismatch");
    for (Eigen::Index j = 0; j < pv[i].size; ++j) {
      vv[i].data[j] = momentum * vv[i].data[j] + gv[i].data[j];
      pv[i].data[j] += lr * vv[i].data[j];
    }
  }
}

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Mat mat_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw BadInput(std::string("checkpoint: tensor ") + name + " does not match shape header");
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw BadInput(std::string("checkpoint: tensor ") + name + " does not match shape header");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
  }
  return m;
}

Vec vec_from_json(const json& j, Eigen::Index size, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw BadInput(std::string("checkpoint: tensor ") + name + " does not match shape header");
  Vec v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& p) {
  json j;
  j["format"] = "scotrl-policy";
  j["version"] = 1;
  j["shape"] = {{"v", p.v}, {"d", p.d}, {"d_h", p.dh}, {"k", p.k}};
  j["tensors"] = {{"emb", mat_to_json(p.emb)}, {"q_ctx", vec_to_json(p.q_ctx)},
                  {"w1", mat_to_json(p.w1)},   {"b1", vec_to_json(p.b1)},
                  {"w2", mat_to_json(p.w2)},   {"b2", vec_to_json(p.b2)},
                  {"w3", mat_to_json(p.w3)},   {"b3", vec_to_json(p.b3)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadInput("checkpoint: cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadInput("checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw BadInput(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "scotrl-policy")
      throw BadInput("checkpoint: unrecognized format tag");
    if (j.at("version").get<int>() != 1) throw BadInput("checkpoint: unsupported version");
    const json& shape = j.at("shape");
    PolicyParams p = zero_params(shape.at("v").get<int>(), shape.at("d").get<int>(),
                                 shape.at("d_h").get<int>(), shape.at("k").get<int>());
    const json& t = j.at("tensors");
    p.emb = mat_from_json(t.at("emb"), p.v, p.d, "emb");
    p.q_ctx = vec_from_json(t.at("q_ctx"), p.d, "q_ctx");
    p.w1 = mat_from_json(t.at("w1"), p.dh,
                         static_cast<Eigen::Index>(p.k + 1 + kPromptRegions) * p.d, "w1");
    p.b1 = vec_from_json(t.at("b1"), p.dh, "b1");
    p.w2 = mat_from_json(t.at("w2"), p.dh, p.dh, "w2");
    p.b2 = vec_from_json(t.at("b2"), p.dh, "b2");
    p.w3 = mat_from_json(t.at("w3"), p.v, p.dh, "w3");
    p.b3 = vec_from_json(t.at("b3"), p.v, "b3");
    return p;
  } catch (const json::exception& e) {
    throw BadInput(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace scotrl
