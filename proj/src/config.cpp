#include "uflst/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "uflst/error.hpp"

namespace uflst {

using nlohmann::json;

namespace {

json source_json(const DataSource& s) {
  return {{"source", s.source},         {"path", s.path},
          {"labels_path", s.labels_path}, {"delimiter", s.delimiter},
          {"label_column", s.label_column}};
}

DataSource source_from(const json& j) {
  DataSource s;
  s.source = j.at("source").get<std::string>();
  s.path = j.at("path").get<std::string>();
  s.labels_path = j.at("labels_path").get<std::string>();
  s.delimiter = j.at("delimiter").get<std::string>();
  s.label_column = j.at("label_column").get<bool>();
  return s;
}

json to_json(const TrainConfig& c) {
  json j;
  j["rounds"] = c.rounds;
  j["epochs_per_round"] = c.epochs_per_round;
  j["episodes_per_round"] = c.episodes_per_round ? json(*c.episodes_per_round) : json(nullptr);
  j["seed"] = c.seed;
  j["metric_k"] = c.metric_k;
  j["reset_optimizer"] = c.reset_optimizer;
  j["model"] = {{"hidden", c.model.hidden},
                {"output_dim", c.model.output_dim},
                {"activation", to_string(c.model.activation)}};
  const OptimizerConfig& o = c.optimizer;
  j["optimizer"] = {{"learning_rate", o.learning_rate},
                    {"decay_factor", o.decay_factor},
                    {"decay_after_epoch", o.decay_after_epoch},
                    {"decay_mode", to_string(o.decay_mode)},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"epsilon", o.epsilon}};
  const DbscanConfig& d = c.dbscan;
  j["dbscan"] = {{"ms", d.min_points},
                 {"P", d.smallest_count},
                 {"P_fraction", d.smallest_fraction},
                 {"epsilon_override", d.epsilon_override ? json(*d.epsilon_override) : json(nullptr)},
                 {"epsilon_rule", to_string(d.epsilon_rule)}};
  const EpisodeConfig& e = c.episodes;
  j["episodes"] = {{"way_train", e.way_train},
                   {"way_test", e.way_test},
                   {"examples_per_class", e.examples_per_class},
                   {"support_shots", e.support_shots},
                   {"query_shots", e.query_shots},
                   {"mode", to_string(e.mode)}};
  j["loss"] = {{"kind", to_string(c.loss.kind)},
               {"margin", c.loss.margin},
               {"hard_soft_margin", c.loss.hard_soft_margin}};
  const FewShotProtocol& p = c.eval.protocol;
  j["eval"] = {{"way", p.way},
               {"shots", p.shots},
               {"queries", p.queries},
               {"episodes", p.episodes},
               {"every_round", c.eval.every_round}};
  const SyntheticSpec& s = c.data.synthetic;
  j["data"] = {{"train", source_json(c.data.train)},
               {"test", source_json(c.data.test)},
               {"train_fraction", c.data.train_fraction},
               {"synthetic",
                {{"num_classes", s.num_classes},
                 {"points_per_class", s.points_per_class},
                 {"input_dim", s.input_dim},
                 {"separation", s.separation},
                 {"within_std", s.within_std},
                 {"heldout_classes", s.heldout_classes},
                 {"heldout_points_per_class", s.heldout_points_per_class},
                 {"center_dim", s.center_dim},
                 {"nuisance_std", s.nuisance_std},
                 {"stretch", s.stretch},
                 {"seed", s.seed}}}};
  return j;
}

TrainConfig from_json(const json& j) {
  TrainConfig c;
  c.rounds = j.at("rounds").get<std::size_t>();
  c.epochs_per_round = j.at("epochs_per_round").get<std::size_t>();
  if (!j.at("episodes_per_round").is_null()) c.episodes_per_round = j.at("episodes_per_round").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.metric_k = j.at("metric_k").get<std::size_t>();
  c.reset_optimizer = j.at("reset_optimizer").get<bool>();
  const json& m = j.at("model");
  c.model.hidden = m.at("hidden").get<std::vector<std::size_t>>();
  c.model.output_dim = m.at("output_dim").get<std::size_t>();
  c.model.activation = activation_from_string(m.at("activation").get<std::string>());
  const json& o = j.at("optimizer");
  c.optimizer.learning_rate = o.at("learning_rate").get<double>();
  c.optimizer.decay_factor = o.at("decay_factor").get<double>();
  c.optimizer.decay_after_epoch = o.at("decay_after_epoch").get<int>();
  c.optimizer.decay_mode = decay_mode_from_string(o.at("decay_mode").get<std::string>());
  c.optimizer.beta1 = o.at("beta1").get<double>();
  c.optimizer.beta2 = o.at("beta2").get<double>();
  c.optimizer.epsilon = o.at("epsilon").get<double>();
  const json& d = j.at("dbscan");
  c.dbscan.min_points = d.at("ms").get<std::size_t>();
  c.dbscan.smallest_count = d.at("P").get<std::size_t>();
  c.dbscan.smallest_fraction = d.at("P_fraction").get<double>();
  if (!d.at("epsilon_override").is_null()) c.dbscan.epsilon_override = d.at("epsilon_override").get<double>();
  c.dbscan.epsilon_rule = epsilon_rule_from_string(d.at("epsilon_rule").get<std::string>());
  const json& e = j.at("episodes");
  c.episodes.way_train = e.at("way_train").get<std::size_t>();
  c.episodes.way_test = e.at("way_test").get<std::size_t>();
  c.episodes.examples_per_class = e.at("examples_per_class").get<std::size_t>();
  c.episodes.support_shots = e.at("support_shots").get<std::size_t>();
  c.episodes.query_shots = e.at("query_shots").get<std::size_t>();
  c.episodes.mode = episode_mode_from_string(e.at("mode").get<std::string>());
  const json& l = j.at("loss");
  c.loss.kind = loss_kind_from_string(l.at("kind").get<std::string>());
  c.loss.margin = l.at("margin").get<double>();
  c.loss.hard_soft_margin = l.at("hard_soft_margin").get<bool>();
  const json& p = j.at("eval");
  c.eval.protocol.way = p.at("way").get<std::size_t>();
  c.eval.protocol.shots = p.at("shots").get<std::size_t>();
  c.eval.protocol.queries = p.at("queries").get<std::size_t>();
  c.eval.protocol.episodes = p.at("episodes").get<std::size_t>();
  c.eval.every_round = p.at("every_round").get<bool>();
  const json& data = j.at("data");
  c.data.train = source_from(data.at("train"));
  c.data.test = source_from(data.at("test"));
  c.data.train_fraction = data.at("train_fraction").get<double>();
  const json& s = data.at("synthetic");
  c.data.synthetic.num_classes = s.at("num_classes").get<std::size_t>();
  c.data.synthetic.points_per_class = s.at("points_per_class").get<std::size_t>();
  c.data.synthetic.input_dim = s.at("input_dim").get<std::size_t>();
  c.data.synthetic.separation = s.at("separation").get<double>();
  c.data.synthetic.within_std = s.at("within_std").get<double>();
  c.data.synthetic.heldout_classes = s.at("heldout_classes").get<std::size_t>();
  c.data.synthetic.heldout_points_per_class = s.at("heldout_points_per_class").get<std::size_t>();
  c.data.synthetic.center_dim = s.at("center_dim").get<std::size_t>();
  c.data.synthetic.nuisance_std = s.at("nuisance_std").get<double>();
  c.data.synthetic.stretch = s.at("stretch").get<double>();
  c.data.synthetic.seed = s.at("seed").get<std::uint64_t>();
  return c;
}

// Copies `src` onto `dst`, refusing keys that `dst` does not have.
void merge_known(json& dst, const json& src, const std::string& prefix) {
  require(src.is_object(), ErrorKind::kConfig,
          (prefix.empty() ? std::string("config") : prefix) + " must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    require(dst.contains(it.key()), ErrorKind::kConfig, "unknown config key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_known(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

TrainConfig parse_checked(const json& j, const std::string& origin) {
  TrainConfig c;
  try {
    c = from_json(j);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, origin + ": " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::vector<std::size_t> ModelConfig::layer_dims(std::size_t input_dim) const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

void TrainConfig::validate() const {
  require(rounds >= 1, ErrorKind::kConfig, "rounds must be >= 1");
  require(epochs_per_round >= 1, ErrorKind::kConfig, "epochs_per_round must be >= 1");
  require(metric_k >= 1, ErrorKind::kConfig, "metric_k must be >= 1");
  require(model.output_dim >= 1, ErrorKind::kConfig, "model.output_dim must be >= 1");
  for (std::size_t h : model.hidden) require(h >= 1, ErrorKind::kConfig, "hidden widths must be >= 1");
  optimizer.validate();
  dbscan.validate();
  episodes.validate();
  loss.validate();
  eval.protocol.validate();
  require((loss.kind == LossKind::kPrototype) == (episodes.mode == EpisodeMode::kPrototype),
          ErrorKind::kConfig, "prototype loss requires prototype episodes and vice versa");
  require(eval.protocol.way == episodes.way_test, ErrorKind::kConfig,
          "eval.way must equal episodes.way_test");
  if (episodes.mode == EpisodeMode::kPrototype) {
    require(eval.protocol.shots == episodes.support_shots, ErrorKind::kConfig,
            "eval.shots must equal episodes.support_shots");
  }
  require(data.train_fraction > 0.0 && data.train_fraction <= 1.0, ErrorKind::kConfig,
          "data.train_fraction must lie in (0, 1]");
  data.synthetic.validate();
}

void TrainConfig::use_loss(LossKind kind) {
  loss.kind = kind;
  episodes = kind == LossKind::kPrototype
                 ? EpisodeConfig::prototype_preset(eval.protocol.shots, eval.protocol.way)
                 : EpisodeConfig::triplet_preset();
  episodes.way_test = eval.protocol.way;
}

std::string to_json_text(const TrainConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

TrainConfig config_from_json_text(const std::string& text, const std::string& origin) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, origin + ": " + e.what());
  }
  json merged = to_json(TrainConfig{});
  merge_known(merged, parsed, "");
  return parse_checked(merged, origin);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kConfig, "cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str(), path);
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  apply_overrides(cfg, {assignment});
}

void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& assignments) {
  json j = to_json(cfg);
  for (const std::string& assignment : assignments) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::kConfig,
            "override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part =
          key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      require(node->is_object() && node->contains(part), ErrorKind::kConfig,
              "unknown config key '" + key + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    require(!node->is_object(), ErrorKind::kConfig, "'" + key + "' is a section, not a value");
    *node = value;
  }
  cfg = parse_checked(j, "overrides");
}

}  // namespace uflst
