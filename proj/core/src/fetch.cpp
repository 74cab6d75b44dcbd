#include "rootspoof/fetch.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace rootspoof {

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

bool transient(int status) { return status == 429 || (status >= 500 && status <= 599); }

}  // namespace

FetchSummary fetch_measurements(const FetchConfig& config, std::string_view measurement_id, TimeRange range,
                                std::ostream& out, std::string cursor) {
  FetchSummary summary;
  if (range.empty()) return summary;
  if (config.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");

  const Endpoint endpoint = split_url(config.base_url);
  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Key ") + key);
  }
  const std::string path = endpoint.path_prefix + "/measurements/" + std::string(measurement_id) + "/results";

  while (true) {
    httplib::Params params{{"start", std::to_string(range.start)}, {"stop", std::to_string(range.stop)}};
    if (!cursor.empty()) params.emplace("cursor", cursor);

    httplib::Result res;
    auto backoff = config.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      res = client.Get(path, params, headers);
      const bool retry = !res || transient(res->status);
      if (!retry) break;
      if (attempt >= config.max_attempts) {
        const std::string why = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        throw FetchError("giving up on measurement " + std::string(measurement_id) + " after " +
                             std::to_string(attempt) + " attempts: " + why,
                         cursor);
      }
      ++summary.retries;
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config.max_backoff);
    }
    if (res->status != 200) {
      throw FetchError("measurement " + std::string(measurement_id) + ": HTTP " + std::to_string(res->status), cursor);
    }

    nlohmann::json page;
    try {
      page = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw FetchError("truncated or malformed page for measurement " + std::string(measurement_id), cursor);
    }
    const auto results = page.find("results");
    const auto count = page.find("count");
    if (!page.is_object() || results == page.end() || !results->is_array() || count == page.end() ||
        !count->is_number_integer() || count->get<std::size_t>() != results->size()) {
      throw FetchError("truncated page for measurement " + std::string(measurement_id) + ": count mismatch", cursor);
    }

    for (const auto& record : *results) out << record.dump() << '\n';
    if (!out) throw IoError("failed writing fetched records");
    summary.records += results->size();
    ++summary.pages;

    auto next = page.find("next");
    if (next == page.end() || next->is_null()) break;
    if (!next->is_string() || next->get<std::string>().empty()) {
      throw FetchError("page carries an invalid cursor", cursor);
    }
    cursor = next->get<std::string>();
  }
  return summary;
}

}  // namespace rootspoof
