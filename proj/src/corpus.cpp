#include "readest/corpus.hpp"

#include <filesystem>

#include <json.hpp>

#include "readest/error.hpp"
#include "readest/text.hpp"

namespace readest {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Corpus load_corpus(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(1, manifest_path + ": " + e.what());
  }
  if (manifest.value("format", "") != kCorpusFormat)
    throw ConfigError(manifest_path + ": expected format '" + kCorpusFormat + "'");

  Corpus corpus;
  for (const auto& entry : manifest.at("layouts")) {
    const std::string path = (fs::path(dir) / entry.get<std::string>()).string();
    try {
      auto layout = std::make_shared<NewsletterLayout>(parse_layout(read_file(path)));
      const std::string id = layout->newsletter_id;
      if (!corpus.layouts.emplace(id, std::move(layout)).second)
        throw StructuralError("duplicate newsletter_id '" + id + "'");
    } catch (const ParseError& e) {
      throw ParseError(e.line(), path + ": " + e.what());
    }
  }
  for (const auto& u : manifest.at("users")) {
    UserRecord rec;
    rec.user_id = u.at("user_id").get<std::string>();
    const std::string events_path = (fs::path(dir) / u.at("events").get<std::string>()).string();
    try {
      rec.events = parse_event_log(read_file(events_path));
    } catch (const Error& e) {
      throw IoError(events_path + ": " + e.what());
    }
    if (u.contains("labels") && !u["labels"].is_null()) {
      const std::string labels_path = (fs::path(dir) / u["labels"].get<std::string>()).string();
      try {
        rec.labels = parse_labels(read_file(labels_path));
      } catch (const Error& e) {
        throw IoError(labels_path + ": " + e.what());
      }
    }
    corpus.users.push_back(std::move(rec));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir, const std::string& generator_json) {
  ordered_json manifest;
  manifest["format"] = kCorpusFormat;
  if (!generator_json.empty()) manifest["generator"] = ordered_json::parse(generator_json);
  manifest["layouts"] = ordered_json::array();
  for (const auto& [id, layout] : corpus.layouts) {
    const std::string rel = "layouts/" + id + ".json";
    write_file((fs::path(dir) / rel).string(), serialize_layout(*layout));
    manifest["layouts"].push_back(rel);
  }
  manifest["users"] = ordered_json::array();
  for (const auto& u : corpus.users) {
    ordered_json entry;
    entry["user_id"] = u.user_id;
    const std::string events_rel = "logs/" + u.user_id + ".jsonl";
    write_file((fs::path(dir) / events_rel).string(), serialize_event_log(u.events));
    entry["events"] = events_rel;
    if (u.labels) {
      const std::string labels_rel = "labels/" + u.user_id + ".jsonl";
      write_file((fs::path(dir) / labels_rel).string(), serialize_labels(*u.labels));
      entry["labels"] = labels_rel;
    } else {
      entry["labels"] = nullptr;
    }
    manifest["users"].push_back(std::move(entry));
  }
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace readest
