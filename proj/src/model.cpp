#include "gp2f/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gp2f/error.hpp"

namespace gp2f {

namespace {
double glorot_stddev(int fan_in, int fan_out) {
  return std::sqrt(2.0 / (fan_in + fan_out));
}
}  // namespace

double FusionParams::alpha() const {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  double e = std::exp(logit);
  return e / (1.0 + e);
}

ProjectorParams init_projector(int in_dim, int hidden_dim, Rng rng) {
  ProjectorParams p;
  p.w1 = DenseMatrix::gaussian(in_dim, hidden_dim, glorot_stddev(in_dim, hidden_dim), rng);
  p.w2 = DenseMatrix::gaussian(hidden_dim, hidden_dim, glorot_stddev(hidden_dim, hidden_dim), rng);
  return p;
}

EncoderParams init_encoder(int hidden_dim, Rng rng) {
  EncoderParams e;
  const double s = glorot_stddev(hidden_dim, hidden_dim);
  e.w1 = DenseMatrix::gaussian(hidden_dim, hidden_dim, s, rng);
  e.w2 = DenseMatrix::gaussian(hidden_dim, hidden_dim, s, rng);
  e.frozen = false;
  return e;
}

AdapterParams init_adapters(int hidden_dim, int rank, double beta_init, Rng rng) {
  if (rank >= hidden_dim)
    throw ConfigError("adapter rank must be smaller than hidden_dim");
  AdapterParams a;
  for (auto& l : a.layer) {
    l.down = DenseMatrix::gaussian(hidden_dim, rank, glorot_stddev(hidden_dim, rank), rng);
    l.up = DenseMatrix::gaussian(rank, hidden_dim, glorot_stddev(rank, hidden_dim), rng);
    l.beta = beta_init;
  }
  return a;
}

ClassifierParams init_classifier(int hidden_dim, int num_classes, Rng rng) {
  ClassifierParams c;
  c.w = DenseMatrix::gaussian(hidden_dim, num_classes, glorot_stddev(hidden_dim, num_classes), rng);
  c.b = DenseMatrix(1, num_classes);
  return c;
}

// ---- tape builders ----

int tape_projector(Tape& t, int x, int w1, int w2) {
  return t.matmul(t.relu(t.matmul(x, w1)), w2);
}

int tape_gcn_layer(Tape& t, int ahat, int h, int w, bool activate) {
  int z = t.matmul(t.matmul(ahat, h), w);
  return activate ? t.relu(z) : z;
}

int tape_frozen_branch(Tape& t, int ahat, int h0, int enc_w1, int enc_w2) {
  int h1 = tape_gcn_layer(t, ahat, h0, enc_w1, true);
  return tape_gcn_layer(t, ahat, h1, enc_w2, false);
}

namespace {
int tape_adapter_residual(Tape& t, int h, const TapeAdapter& a) {
  int res = t.matmul(t.relu(t.matmul(h, a.down)), a.up);
  return t.add(h, t.mul_scalar(res, a.beta));
}
}  // namespace

int tape_adapted_branch(Tape& t, int ahat, int h0, int enc_w1, int enc_w2,
                        const TapeAdapter& l1, const TapeAdapter& l2) {
  int h1 = tape_gcn_layer(t, ahat, h0, enc_w1, true);
  int h1_adp = tape_adapter_residual(t, h1, l1);
  int h2 = tape_gcn_layer(t, ahat, h1_adp, enc_w2, false);
  return tape_adapter_residual(t, h2, l2);
}

int tape_classifier(Tape& t, int h, int w, int b) {
  return t.add_rowvec(t.matmul(h, w), b);
}

// ---- plain forward ops (thin wrappers over the tape builders) ----

DenseMatrix project_features(const DenseMatrix& x, const ProjectorParams& proj) {
  Tape t;
  return t.value(tape_projector(t, t.constant(x), t.constant(proj.w1), t.constant(proj.w2)));
}

DenseMatrix gcn_layer(const DenseMatrix& h, const NormalizedAdjacency& ahat,
                      const DenseMatrix& w, bool activate) {
  Tape t;
  return t.value(tape_gcn_layer(t, t.constant(ahat.m), t.constant(h), t.constant(w), activate));
}

DenseMatrix encode_frozen(const Graph& g, const NormalizedAdjacency& ahat,
                          const EncoderParams& enc, const ProjectorParams& proj) {
  if (!enc.frozen) throw ContractError("encode_frozen: encoder parameters are not frozen");
  Tape t;
  int h0 = tape_projector(t, t.constant(g.features), t.constant(proj.w1), t.constant(proj.w2));
  return t.value(tape_frozen_branch(t, t.constant(ahat.m), h0, t.constant(enc.w1),
                                    t.constant(enc.w2)));
}

DenseMatrix encode_adapted(const Graph& g, const NormalizedAdjacency& ahat,
                           const EncoderParams& enc, const AdapterParams& adapters,
                           const ProjectorParams& proj) {
  if (!enc.frozen) throw ContractError("encode_adapted: encoder parameters are not frozen");
  Tape t;
  int h0 = tape_projector(t, t.constant(g.features), t.constant(proj.w1), t.constant(proj.w2));
  auto mk = [&](const AdapterLayerParams& l) {
    DenseMatrix beta(1, 1);
    beta.data[0] = l.beta;
    return TapeAdapter{t.constant(l.down), t.constant(l.up), t.constant(std::move(beta))};
  };
  TapeAdapter l1 = mk(adapters.layer[0]);
  TapeAdapter l2 = mk(adapters.layer[1]);
  return t.value(tape_adapted_branch(t, t.constant(ahat.m), h0, t.constant(enc.w1),
                                     t.constant(enc.w2), l1, l2));
}

DenseMatrix fuse(const DenseMatrix& h_pre, const DenseMatrix& h_adp,
                 const FusionParams& fusion) {
  if (!h_pre.same_shape(h_adp)) throw DimensionError("fuse: branch shapes differ");
  const double a = fusion.alpha();
  DenseMatrix out(h_pre.rows, h_pre.cols);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = a * h_pre.data[i] + (1.0 - a) * h_adp.data[i];
  return out;
}

DenseMatrix classify(const DenseMatrix& h, const ClassifierParams& cls) {
  Tape t;
  return t.value(tape_classifier(t, t.constant(h), t.constant(cls.w), t.constant(cls.b)));
}

BranchOutputs encode_dual(const Graph& g, const NormalizedAdjacency& ahat,
                          const EncoderParams& enc, const AdapterParams& adapters,
                          const ProjectorParams& proj, const FusionParams& fusion) {
  BranchOutputs out;
  out.h_pre = encode_frozen(g, ahat, enc, proj);
  out.h_adp = encode_adapted(g, ahat, enc, adapters, proj);
  out.h_mix = fuse(out.h_pre, out.h_adp, fusion);
  out.alpha = fusion.alpha();
  return out;
}

// ---- checkpoint ----

namespace {

nlohmann::json tensor_to_json(const DenseMatrix& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

DenseMatrix tensor_from_json(const nlohmann::json& j) {
  DenseMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.size())
    throw ParseError("checkpoint tensor: data length does not match shape");
  m.data = std::move(data);
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  if (!c.enc.frozen) throw ContractError("save_checkpoint: encoder must be frozen");
  nlohmann::json j{
      {"format", "gp2f-checkpoint"},
      {"version", 1},
      {"frozen", true},
      {"pretrain_seed", c.pretrain_seed},
      {"input_dim", c.input_dim},
      {"hidden_dim", c.enc.hidden_dim()},
      {"tensors",
       {{"enc.w1", tensor_to_json(c.enc.w1)},
        {"enc.w2", tensor_to_json(c.enc.w2)},
        {"proj.w1", tensor_to_json(c.proj.w1)},
        {"proj.w2", tensor_to_json(c.proj.w2)}}},
  };
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "gp2f-checkpoint")
      throw ParseError("checkpoint " + path + ": unrecognized format field");
    Checkpoint c;
    c.pretrain_seed = j.at("pretrain_seed").get<std::uint64_t>();
    c.input_dim = j.at("input_dim").get<int>();
    const auto& t = j.at("tensors");
    c.enc.w1 = tensor_from_json(t.at("enc.w1"));
    c.enc.w2 = tensor_from_json(t.at("enc.w2"));
    c.enc.frozen = j.at("frozen").get<bool>();
    c.proj.w1 = tensor_from_json(t.at("proj.w1"));
    c.proj.w2 = tensor_from_json(t.at("proj.w2"));
    if (!c.enc.frozen) throw ParseError("checkpoint " + path + ": frozen flag is false");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
}

// ---- ParamStore ----

int ParamStore::add(std::string name, ParamGroup group, DenseMatrix value) {
  if (find(name) != -1) throw ContractError("ParamStore: duplicate name " + name);
  params_.push_back(NamedParam{std::move(name), group, std::move(value)});
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<DenseMatrix> ParamStore::snapshot() const {
  std::vector<DenseMatrix> snap;
  snap.reserve(params_.size());
  for (const auto& p : params_) snap.push_back(p.value);
  return snap;
}

void ParamStore::restore(const std::vector<DenseMatrix>& snap) {
  if (snap.size() != params_.size())
    throw ContractError("ParamStore::restore: snapshot size mismatch");
  for (std::size_t i = 0; i < snap.size(); ++i) params_[i].value = snap[i];
}

}  // namespace gp2f
