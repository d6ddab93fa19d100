#include "uflst/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "uflst/binary_io.hpp"
#include "uflst/error.hpp"
#include "uflst/kernels.hpp"
#include "uflst/parallel.hpp"

namespace uflst {

namespace {

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fresh_a] = ab.emplace(a[i], b[i]);
    auto [y, fresh_b] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

double neumaier_sum(std::span<const double> v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

double nmi(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::kInput, "nmi: labelings differ in length");
  require(!a.empty(), ErrorKind::kInput, "nmi: empty labeling");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> ca, cb;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha == 0.0 || hb == 0.0) return same_partition(a, b) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pij = static_cast<double>(c) / n;
    const double pa = static_cast<double>(ca[key.first]) / n;
    const double pb = static_cast<double>(cb[key.second]) / n;
    mi += pij * std::log(pij / (pa * pb));
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

void FewShotProtocol::validate() const {
  require(way >= 2, ErrorKind::kConfig, "evaluation way must be >= 2");
  require(shots >= 1, ErrorKind::kConfig, "evaluation shots must be >= 1");
  require(queries >= 1, ErrorKind::kConfig, "evaluation queries must be >= 1");
  require(episodes >= 1, ErrorKind::kConfig, "evaluation episodes must be >= 1");
}

std::vector<EvalEpisode> sample_eval_episodes(std::span<const int> labels,
                                              const FewShotProtocol& protocol, Rng& rng) {
  protocol.validate();
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  const std::size_t need = protocol.shots + protocol.queries;
  std::vector<const std::vector<std::size_t>*> eligible;
  for (const auto& [label, members] : by_label)
    if (members.size() >= need) eligible.push_back(&members);
  if (eligible.size() < protocol.way) {
    fail(ErrorKind::kProtocolInfeasible,
         std::to_string(protocol.way) + "-way " + std::to_string(protocol.shots) + "-shot needs " +
             std::to_string(protocol.way) + " classes with " + std::to_string(need) +
             " examples, found " + std::to_string(eligible.size()));
  }
  std::vector<EvalEpisode> out(protocol.episodes);
  for (EvalEpisode& ep : out) {
    for (std::size_t c : rng.sample_without_replacement(eligible.size(), protocol.way)) {
      const auto& members = *eligible[c];
      std::vector<std::size_t> picked;
      for (std::size_t m : rng.sample_without_replacement(members.size(), need)) picked.push_back(members[m]);
      ep.support.emplace_back(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(protocol.shots));
      ep.query.emplace_back(picked.begin() + static_cast<std::ptrdiff_t>(protocol.shots), picked.end());
    }
  }
  return out;
}

double episode_accuracy(const Matrix& embeddings, const EvalEpisode& episode) {
  const std::size_t way = episode.support.size();
  Matrix protos(way, embeddings.cols());
  for (std::size_t c = 0; c < way; ++c) {
    for (std::size_t i : episode.support[c]) kernels::axpy(1.0, embeddings.row(i), protos.row(c));
    const double inv = 1.0 / static_cast<double>(episode.support[c].size());
    for (double& v : protos.row(c)) v *= inv;
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < way; ++c) {
    for (std::size_t q : episode.query[c]) {
      std::size_t best = 0;
      double best_d = kernels::squared_distance(embeddings.row(q), protos.row(0));
      for (std::size_t k = 1; k < way; ++k) {
        const double d = kernels::squared_distance(embeddings.row(q), protos.row(k));
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      correct += best == c;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

AccuracyResult few_shot_accuracy(const ModelParams& model, const Matrix& features,
                                 std::span<const int> labels, const FewShotProtocol& protocol,
                                 Rng& rng) {
  require(labels.size() == features.rows(), ErrorKind::kInput,
          "evaluation labels do not match the feature rows");
  const auto episodes = sample_eval_episodes(labels, protocol, rng);
  const Matrix emb = embed(model, features);
  std::vector<double> acc(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t e) { acc[e] = episode_accuracy(emb, episodes[e]); });
  AccuracyResult r;
  r.episodes = acc.size();
  r.mean = neumaier_sum(acc) / static_cast<double>(acc.size());
  std::vector<double> sq(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) sq[i] = (acc[i] - r.mean) * (acc[i] - r.mean);
  r.std = std::sqrt(neumaier_sum(sq) / static_cast<double>(acc.size()));
  return r;
}

RoundMetrics cluster_stats(const PseudoLabeledSet& pl, std::span<const int> truth) {
  RoundMetrics m;
  m.num_clusters = pl.num_clusters;
  m.num_outliers = pl.outlier_indices.size();
  if (pl.num_clusters > 0) {
    m.mean_cluster_size =
        static_cast<double>(pl.kept_indices.size()) / static_cast<double>(pl.num_clusters);
  }
  if (!pl.kept_indices.empty() && !truth.empty()) {
    std::vector<int> t;
    t.reserve(pl.kept_indices.size());
    for (std::size_t i : pl.kept_indices) {
      require(i < truth.size(), ErrorKind::kContractViolation, "kept index outside the labels");
      t.push_back(truth[i]);
    }
    m.nmi = nmi(t, pl.labels);
  }
  return m;
}

std::string metrics_header() {
  return "version,round,nmi,num_clusters,num_outliers,mean_cluster_size,accuracy,accuracy_std,"
         "mean_loss,epsilon,min_points,fallback_rung,way,episodes";
}

std::string metrics_row(const RoundMetrics& m) {
  std::ostringstream s;
  s << kMetricsVersion << ',' << m.round << ',' << opt(m.nmi) << ',' << m.num_clusters << ','
    << m.num_outliers << ',' << num(m.mean_cluster_size) << ',' << opt(m.accuracy) << ','
    << opt(m.accuracy_std) << ',' << opt(m.mean_loss) << ',' << num(m.epsilon) << ','
    << m.min_points << ',' << m.fallback_rung << ',' << m.way << ',' << m.episodes;
  return s.str();
}

void write_metrics(const std::vector<RoundMetrics>& history, const std::string& path) {
  std::string text = metrics_header() + "\n";
  for (const RoundMetrics& m : history) text += metrics_row(m) + "\n";
  binary::write_atomically(path, text);
}

std::vector<RoundMetrics> read_metrics(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open metrics file " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == metrics_header(), ErrorKind::kFormat,
          path + ": unexpected metrics header");
  std::vector<RoundMetrics> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::string where = path + ":" + std::to_string(line_no);
    require(f.size() == 14, ErrorKind::kParse, where + ": expected 14 fields");
    require(f[0] == std::to_string(kMetricsVersion), ErrorKind::kFormat, where + ": unsupported version");
    try {
      RoundMetrics m;
      m.round = std::stoi(f[1]);
      m.nmi = parse_opt(f[2]);
      m.num_clusters = std::stoul(f[3]);
      m.num_outliers = std::stoul(f[4]);
      m.mean_cluster_size = std::stod(f[5]);
      m.accuracy = parse_opt(f[6]);
      m.accuracy_std = parse_opt(f[7]);
      m.mean_loss = parse_opt(f[8]);
      m.epsilon = std::stod(f[9]);
      m.min_points = std::stoul(f[10]);
      m.fallback_rung = std::stoi(f[11]);
      m.way = std::stoul(f[12]);
      m.episodes = std::stoul(f[13]);
      out.push_back(m);
    } catch (const std::logic_error&) {
      fail(ErrorKind::kParse, where + ": non-numeric field");
    }
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace uflst
