#include "readest/run_config.hpp"

#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "readest/error.hpp"
#include "readest/text.hpp"

namespace readest {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"run", {"seed", "threads"}},
    {"simulate",
     {"users", "newsletters", "min_messages", "max_messages", "min_words", "max_words", "px_per_word",
      "max_open_seconds", "mixture"}},
    {"train", {"kinds", "batch_size", "max_epochs", "learning_rate", "positive_weight", "patience"}},
    {"cv", {"rounds"}},
};

template <class T>
T get(const pt::ptree& tree, const std::string& path, T fallback, const std::string& source) {
  const auto v = tree.get_optional<std::string>(path);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = parse_number(*v);
      used = v->size();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      out = std::stoull(*v, &used);
    } else {
      out = static_cast<T>(std::stol(*v, &used));
    }
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(source + ": '" + path + "' has invalid value '" + *v + "'");
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<EstimatorKind> parse_kind_list(std::string_view text) {
  std::vector<EstimatorKind> kinds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) {
      if (item == "all") {
        const auto& all = all_estimator_kinds();
        kinds.insert(kinds.end(), all.begin(), all.end());
      } else {
        kinds.push_back(estimator_kind_from_string(item));
      }
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (kinds.empty()) throw ConfigError("no estimator kinds given");
  return kinds;
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (cv_rounds < 0) throw ConfigError("cv rounds must be >= 0");
  if (kinds.empty()) throw ConfigError("no estimator kinds selected");
  sim.validate();
  train.validate();
}

RunConfig parse_run_config(std::string_view ini_text, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    const auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end()) throw ConfigError(source + ": unknown section [" + section + "]");
    if (!body.data().empty() && body.empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body)
      if (!known->second.count(key)) throw ConfigError(source + ": unknown key '" + section + "." + key + "'");
  }

  RunConfig c;
  c.seed = get<std::uint64_t>(tree, "run.seed", c.seed, source);
  c.threads = get<int>(tree, "run.threads", c.threads, source);

  auto& s = c.sim;
  s.n_users = get<int>(tree, "simulate.users", s.n_users, source);
  s.newsletters = get<int>(tree, "simulate.newsletters", s.newsletters, source);
  s.min_messages = get<int>(tree, "simulate.min_messages", s.min_messages, source);
  s.max_messages = get<int>(tree, "simulate.max_messages", s.max_messages, source);
  s.min_words = get<int>(tree, "simulate.min_words", s.min_words, source);
  s.max_words = get<int>(tree, "simulate.max_words", s.max_words, source);
  s.px_per_word = get<double>(tree, "simulate.px_per_word", s.px_per_word, source);
  s.max_open_seconds = get<int>(tree, "simulate.max_open_seconds", s.max_open_seconds, source);
  c.mixture = tree.get<std::string>("simulate.mixture", c.mixture);
  s.mixture = mixture_preset(c.mixture);
  s.seed = c.seed;

  if (const auto kinds = tree.get_optional<std::string>("train.kinds")) c.kinds = parse_kind_list(*kinds);
  auto& t = c.train;
  t.batch_size = get<std::size_t>(tree, "train.batch_size", t.batch_size, source);
  t.max_epochs = get<int>(tree, "train.max_epochs", t.max_epochs, source);
  t.adam.lr = get<double>(tree, "train.learning_rate", t.adam.lr, source);
  t.positive_weight = get<double>(tree, "train.positive_weight", t.positive_weight, source);
  t.patience = get<int>(tree, "train.patience", t.patience, source);
  t.seed = c.seed;

  c.cv_rounds = get<int>(tree, "cv.rounds", c.cv_rounds, source);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path), path); }

std::string resolved_config(const RunConfig& c) {
  std::string kinds;
  for (auto k : c.kinds) kinds += (kinds.empty() ? "" : ",") + std::string(to_string(k));
  std::ostringstream out;
  out << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "threads = " << c.threads << "\n\n"
      << "[simulate]\n"
      << "users = " << c.sim.n_users << "\n"
      << "newsletters = " << c.sim.newsletters << "\n"
      << "min_messages = " << c.sim.min_messages << "\n"
      << "max_messages = " << c.sim.max_messages << "\n"
      << "min_words = " << c.sim.min_words << "\n"
      << "max_words = " << c.sim.max_words << "\n"
      << "px_per_word = " << format_number(c.sim.px_per_word) << "\n"
      << "max_open_seconds = " << c.sim.max_open_seconds << "\n"
      << "mixture = " << c.mixture << "\n\n"
      << "[train]\n"
      << "kinds = " << kinds << "\n"
      << "batch_size = " << c.train.batch_size << "\n"
      << "max_epochs = " << c.train.max_epochs << "\n"
      << "learning_rate = " << format_number(c.train.adam.lr) << "\n"
      << "positive_weight = " << format_number(c.train.positive_weight) << "\n"
      << "patience = " << c.train.patience << "\n\n"
      << "[cv]\n"
      << "rounds = " << c.cv_rounds << "\n";
  return out.str();
}

}  // namespace readest
