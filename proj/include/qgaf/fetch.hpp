#pragma once

#include <sstream>
#include <string>

#include <httplib.h>

#include "qgaf/errors.hpp"
#include "qgaf/marketdata.hpp"

namespace qgaf {

namespace detail {

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline ParsedUrl parse_http_url(const std::string& url) {
    const std::string prefix = "http://";
    if (url.rfind(prefix, 0) != 0) {
        throw ConfigError("only plain http:// URLs are supported: " + url);
    }
    ParsedUrl out;
    std::string rest = url.substr(prefix.size());
    const auto slash = rest.find('/');
    std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    if (slash != std::string::npos) out.path = rest.substr(slash);
    const auto colon = authority.find(':');
    if (colon == std::string::npos) {
        out.host = authority;
    } else {
        out.host = authority.substr(0, colon);
        out.port = std::stoi(authority.substr(colon + 1));
    }
    if (out.host.empty()) throw ConfigError("URL has no host: " + url);
    return out;
}

}  // namespace detail

// Plain GET, no auth; the body is parsed exactly like a local CSV file.
inline PriceSeries fetch_csv_url(const std::string& url, const CsvSchema& schema = {}) {
    const detail::ParsedUrl parsed = detail::parse_http_url(url);
    httplib::Client client(parsed.host, parsed.port);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);
    auto res = client.Get(parsed.path);
    if (!res) {
        throw FetchError("network error fetching " + url + ": " + httplib::to_string(res.error()),
                         -1);
    }
    if (res->status < 200 || res->status >= 300) {
        throw FetchError("HTTP " + std::to_string(res->status) + " fetching " + url, res->status);
    }
    std::istringstream body(res->body);
    return parse_price_csv(body, schema);
}

}  // namespace qgaf
