#include "dkm/machine.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dkm/gaussian.hpp"

namespace dkm {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("train: momentum must lie in [0,1)");
  if (!(batch_fraction > 0.0) || batch_fraction > 1.0)
    throw ConfigError("train: batch fraction must lie in (0,1]");
  if (holdout_fraction < 0.0 || holdout_fraction > 0.5)
    throw ConfigError("train: holdout fraction must lie in [0,0.5]");
  if (hidden_width < 0 || hidden_layers < 1)
    throw ConfigError("train: bad architecture");
  if (eval_every < 0) throw ConfigError("train: eval cadence must be >= 0");
  if (grad_clip < 0.0) throw ConfigError("train: grad clip must be >= 0");
  weights.validate();
  kernel.validate();
}

std::string TrainConfig::canonical_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "T=" << iterations << ";lr=" << learning_rate << ";mom=" << momentum
     << ";batch=" << batch_fraction << ";gamma=" << weights.gamma
     << ";lambda=" << weights.lambda << ";delta=" << weights.delta
     << ";l1=" << weights.lambda1 << ";l2=" << weights.lambda2
     << ";l3=" << weights.lambda3 << ";h=" << hidden_width
     << ";K=" << hidden_layers << ";seed=" << seed
     << ";eval_every=" << eval_every << ";holdout=" << holdout_fraction
     << ";clip=" << grad_clip << ";xi=";
  for (Index i = 0; i < kernel.bandwidths.size(); ++i)
    os << (i ? "," : "") << kernel.bandwidths[i];
  return os.str();
}

namespace {

std::string hex_digest(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

KnockoffMachine train(const Matrix& x, const TrainConfig& cfg) {
  cfg.validate();
  require_data_matrix(x, "train");
  const Index n_all = x.rows();
  const int p = int(x.cols());
  if (n_all < 8) throw ConfigError("train: need at least 8 rows");

  RngStream master(cfg.seed);
  RngStream rs_init = master.substream(0);
  RngStream rs_split = master.substream(1);
  RngStream rs_loop = master.substream(2);
  RngStream rs_eval = master.substream(3);

  // holdout split
  const int n_hold = int(std::floor(cfg.holdout_fraction * double(n_all)));
  const auto order = shuffled_indices(rs_split, int(n_all));
  const int n_train = int(n_all) - n_hold;
  if (n_train < 8) throw ConfigError("train: too few rows after holdout split");

  Matrix xt_rows(n_train, p), xh_rows(std::max(n_hold, 0), p);
  for (int i = 0; i < n_train; ++i) xt_rows.row(i) = x.row(order[i]);
  for (int i = 0; i < n_hold; ++i) xh_rows.row(i) = x.row(order[n_train + i]);

  // per-column standardization fitted on the training rows
  KnockoffMachine machine;
  machine.col_mean = xt_rows.colwise().mean().transpose();
  Matrix xs = xt_rows.rowwise() - machine.col_mean.transpose();
  machine.col_scale =
      (xs.array().square().colwise().sum() / double(n_train - 1)).sqrt().transpose();
  for (int j = 0; j < p; ++j)
    if (!(machine.col_scale[j] > 0.0))
      throw ZeroVariance("train: zero variance in column " + std::to_string(j));
  xs = xs.array().rowwise() / machine.col_scale.transpose().array();
  Matrix hs;
  if (n_hold > 0)
    hs = (xh_rows.rowwise() - machine.col_mean.transpose()).array().rowwise() /
         machine.col_scale.transpose().array();

  // decorrelation target from the training correlation matrix
  const Matrix corr = cov_to_corr(estimate_covariance(xs, 0.0));
  machine.s_star = solve_sdp(corr).s;

  const int h = cfg.hidden_width > 0 ? cfg.hidden_width : 10 * p;
  machine.params = init_machine(p, h, cfg.hidden_layers, rs_init);
  machine.config_digest = hex_digest(crc64(
      reinterpret_cast<const unsigned char*>(cfg.canonical_string().data()),
      cfg.canonical_string().size()));
  SgdState sgd = make_sgd_state(machine.params, cfg.learning_rate, cfg.momentum);

  int m_b = int(std::lround(cfg.batch_fraction * double(n_train)));
  m_b = std::min(std::max(m_b, 4), n_train);
  m_b -= m_b % 2;  // two equal halves
  const Index n_first = m_b / 2;

  std::vector<int> pool(n_train);
  for (int i = 0; i < n_train; ++i) pool[i] = i;

  machine.history.train_loss.reserve(cfg.iterations);
  machine.history.grad_sq_norm.reserve(cfg.iterations);

  Matrix batch(m_b, p);
  ForwardCache cache;
  for (int t = 0; t < cfg.iterations; ++t) {
    const std::vector<int> picked = sample_minibatch(pool, m_b, rs_loop);
    for (int i = 0; i < m_b; ++i) batch.row(i) = xs.row(picked[std::size_t(i)]);
    const Matrix v = sample_std_normal(rs_loop, m_b, p);
    machine.params.train_mode = true;
    const Matrix xtil = forward(machine.params, batch, v, &cache);
    const SwapSet s = sample_swap_set(p, rs_loop);

    Matrix dxt;
    JointBatch full{batch, xtil};
    const LossBreakdown loss = loss_total_grad(full, n_first, s, cfg.kernel,
                                               cfg.weights, machine.s_star, dxt);
    if (!std::isfinite(loss.total))
      throw NonFiniteLoss("train: non-finite loss at iteration " +
                          std::to_string(t + 1));
    MachineGrads grads = backward(machine.params, cache, dxt);
    machine.history.train_loss.push_back(loss.total);
    machine.history.grad_sq_norm.push_back(grad_squared_norm(grads));
    if (cfg.grad_clip > 0.0) clip_grad_norm(grads, cfg.grad_clip);
    sgd_step(machine.params, sgd, grads);

    if (n_hold >= 4 && cfg.eval_every > 0 && (t + 1) % cfg.eval_every == 0) {
      machine.params.train_mode = false;
      const Matrix vh = sample_std_normal(rs_eval, hs.rows(), p);
      const Matrix ht = forward_eval(machine.params, hs, vh);
      const SwapSet sh = sample_swap_set(p, rs_eval);
      const Index half = hs.rows() / 2;
      JointBatch bp{hs.topRows(half), ht.topRows(half)};
      JointBatch bs{hs.bottomRows(hs.rows() - half), ht.bottomRows(hs.rows() - half)};
      const LossBreakdown hl = loss_total(bp, bs, sh, cfg.kernel, cfg.weights,
                                          machine.s_star, MmdEstimator::biased);
      machine.history.holdout_loss.emplace_back(t + 1, hl.total);
      machine.params.train_mode = true;
    }
  }
  machine.params.train_mode = false;
  return machine;
}

std::vector<int> sample_minibatch(std::vector<int>& pool, int m,
                                  RngStream& rng) {
  const int n = int(pool.size());
  if (m < 1 || m > n) throw BadParam("sample_minibatch: need 1 <= m <= pool size");
  for (int i = 0; i < m; ++i) {
    const int j = i + int(rng.below(std::uint64_t(n - i)));
    std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
  }
  return std::vector<int>(pool.begin(), pool.begin() + m);
}

Matrix generate(const KnockoffMachine& m, const Matrix& x, RngStream& rng) {
  if (x.cols() != m.p())
    throw ShapeMismatch("generate: input has " + std::to_string(x.cols()) +
                        " columns, machine expects " + std::to_string(m.p()));
  require_data_matrix(x, "generate");
  const Matrix xs = (x.rowwise() - m.col_mean.transpose()).array().rowwise() /
                    m.col_scale.transpose().array();
  const Matrix v = sample_std_normal(rng, x.rows(), m.p());
  Matrix out = forward_eval(m.params, xs, v);
  out = out.array().rowwise() * m.col_scale.transpose().array();
  out.rowwise() += m.col_mean.transpose();
  return out;
}

std::vector<double> grad_norm_monitor(const std::vector<double>& grad_sq_norm,
                                      int window) {
  if (window < 1) throw BadParam("grad_norm_monitor: window must be >= 1");
  std::vector<double> out;
  for (std::size_t start = 0; start < grad_sq_norm.size(); start += window) {
    const std::size_t end = std::min(grad_sq_norm.size(), start + window);
    double acc = 0.0;
    for (std::size_t i = start; i < end; ++i) acc += grad_sq_norm[i];
    out.push_back(acc / double(end - start));
  }
  return out;
}

// --- checkpoint container ---------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'K', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t crc64_table[256];
bool crc64_ready = false;

void crc64_init() {
  // ECMA-182 polynomial, reflected form
  const std::uint64_t poly = 0xC96C5795D7870F42ULL;
  for (int i = 0; i < 256; ++i) {
    std::uint64_t c = std::uint64_t(i);
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ poly : c >> 1;
    crc64_table[i] = c;
  }
  crc64_ready = true;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(buf, bits);
}

std::uint32_t get_u32(const std::string& buf, std::size_t& pos) {
  if (pos + 4 > buf.size()) throw CorruptFile("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw CorruptFile("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

double get_f64(const std::string& buf, std::size_t& pos) {
  const std::uint64_t bits = get_u64(buf, pos);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

std::uint64_t crc64(const unsigned char* data, std::size_t len) {
  if (!crc64_ready) crc64_init();
  std::uint64_t c = ~0ULL;
  for (std::size_t i = 0; i < len; ++i)
    c = crc64_table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return ~c;
}

void save_checkpoint(const KnockoffMachine& m, const std::string& path) {
  nlohmann::json meta;
  meta["p"] = m.params.p;
  meta["h"] = m.params.h;
  meta["K"] = m.params.K;
  meta["col_mean"] = std::vector<double>(m.col_mean.data(),
                                         m.col_mean.data() + m.col_mean.size());
  meta["col_scale"] = std::vector<double>(
      m.col_scale.data(), m.col_scale.data() + m.col_scale.size());
  meta["s_star"] = std::vector<double>(m.s_star.data(),
                                       m.s_star.data() + m.s_star.size());
  meta["config_digest"] = m.config_digest;
  meta["train_loss"] = m.history.train_loss;
  meta["grad_sq_norm"] = m.history.grad_sq_norm;
  {
    std::vector<std::vector<double>> hl;
    for (const auto& [it, v] : m.history.holdout_loss)
      hl.push_back({double(it), v});
    meta["holdout_loss"] = hl;
  }
  const std::string meta_str = meta.dump();

  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u64(buf, meta_str.size());
  buf += meta_str;

  MachineParams& params = const_cast<MachineParams&>(m.params);
  for (const auto& view : param_views(params))
    for (Index i = 0; i < view.size; ++i) put_f64(buf, view.data[i]);
  for (const auto& view : state_views(params))
    for (Index i = 0; i < view.size; ++i) put_f64(buf, view.data[i]);

  put_u64(buf, crc64(reinterpret_cast<const unsigned char*>(buf.data()),
                     buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_checkpoint: cannot open " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

KnockoffMachine load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatVersionMismatch("load_checkpoint: bad magic bytes");
  if (buf.size() < 4 + 4 + 8 + 8) throw CorruptFile("checkpoint: truncated file");

  const std::uint64_t stored_crc =
      [&] {
        std::size_t pos = buf.size() - 8;
        return get_u64(buf, pos);
      }();
  const std::uint64_t computed = crc64(
      reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 8);
  if (stored_crc != computed)
    throw CorruptFile("load_checkpoint: checksum mismatch");

  std::size_t pos = 4;
  const std::uint32_t version = get_u32(buf, pos);
  if (version != kVersion)
    throw FormatVersionMismatch("load_checkpoint: unsupported format version " +
                                std::to_string(version));
  const std::uint64_t meta_len = get_u64(buf, pos);
  if (pos + meta_len > buf.size() - 8)
    throw CorruptFile("checkpoint: truncated metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(buf.substr(pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("load_checkpoint: bad metadata: ") + e.what());
  }
  pos += meta_len;

  KnockoffMachine m;
  const int p = meta.at("p").get<int>();
  const int h = meta.at("h").get<int>();
  const int K = meta.at("K").get<int>();
  if (p < 1 || h < 1 || K < 1)
    throw CorruptFile("load_checkpoint: bad architecture in metadata");
  RngStream dummy(0);
  m.params = init_machine(p, h, K, dummy);
  m.params.train_mode = false;

  auto to_vector = [](const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), Index(v.size())).eval();
  };
  m.col_mean = to_vector(meta.at("col_mean"));
  m.col_scale = to_vector(meta.at("col_scale"));
  m.s_star = to_vector(meta.at("s_star"));
  if (m.col_mean.size() != p || m.col_scale.size() != p || m.s_star.size() != p)
    throw CorruptFile("load_checkpoint: metadata vector length mismatch");
  m.config_digest = meta.at("config_digest").get<std::string>();
  m.history.train_loss = meta.at("train_loss").get<std::vector<double>>();
  m.history.grad_sq_norm = meta.at("grad_sq_norm").get<std::vector<double>>();
  for (const auto& pair :
       meta.at("holdout_loss").get<std::vector<std::vector<double>>>()) {
    if (pair.size() != 2) throw CorruptFile("load_checkpoint: bad holdout entry");
    m.history.holdout_loss.emplace_back(int(pair[0]), pair[1]);
  }

  for (const auto& view : param_views(m.params)) {
    for (Index i = 0; i < view.size; ++i) {
      if (pos + 8 > buf.size() - 8) throw CorruptFile("checkpoint: truncated tensors");
      view.data[i] = get_f64(buf, pos);
    }
  }
  for (const auto& view : state_views(m.params)) {
    for (Index i = 0; i < view.size; ++i) {
      if (pos + 8 > buf.size() - 8) throw CorruptFile("checkpoint: truncated tensors");
      view.data[i] = get_f64(buf, pos);
    }
  }
  if (pos != buf.size() - 8)
    throw CorruptFile("load_checkpoint: trailing bytes in tensor block");
  return m;
}

}  // namespace dkm
