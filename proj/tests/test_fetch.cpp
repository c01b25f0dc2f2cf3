#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <thread>

#include <httplib.h>

#include "qgaf/fetch.hpp"
#include "test_util.hpp"

using namespace qgaf;

namespace {

constexpr const char* kCsvBody =
    "date,close\n2020-01-01,100\n2020-01-02,105\n2020-01-03,84\n";

// In-process server on an ephemeral port.
struct LocalServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    LocalServer() {
        server.Get("/prices.csv", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kCsvBody, "text/csv");
        });
        server.Get("/not_csv", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<html>hello</html>", "text/html");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~LocalServer() {
        server.stop();
        thread.join();
    }

    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

}  // namespace

TEST_CASE("fetch_csv_url matches load_csv on the same bytes", "[fetch]") {
    LocalServer server;

    const PriceSeries fetched = fetch_csv_url(server.url("/prices.csv"));
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("prices.csv"), kCsvBody);
    const PriceSeries local = load_csv(tmp.file("prices.csv"));

    REQUIRE(fetched.dates == local.dates);
    REQUIRE(fetched.closes == local.closes);
}

TEST_CASE("fetch errors carry transport detail", "[fetch]") {
    SECTION("404 carries the status code") {
        LocalServer server;
        try {
            fetch_csv_url(server.url("/missing.csv"));
            FAIL("expected FetchError");
        } catch (const FetchError& e) {
            REQUIRE(e.status == 404);
        }
    }

    SECTION("non-CSV body fails in the parser") {
        LocalServer server;
        REQUIRE_THROWS_AS(fetch_csv_url(server.url("/not_csv")), ParseError);
    }

    SECTION("connection refused is a transport error") {
        LocalServer server;
        const int dead_port = server.port;  // becomes free once the server stops
        server.server.stop();
        try {
            fetch_csv_url("http://127.0.0.1:" + std::to_string(dead_port) + "/x.csv");
            FAIL("expected FetchError");
        } catch (const FetchError& e) {
            REQUIRE(e.status < 0);
        }
    }

    SECTION("unsupported scheme rejected") {
        REQUIRE_THROWS_AS(fetch_csv_url("ftp://host/file.csv"), ConfigError);
        REQUIRE_THROWS_AS(fetch_csv_url("http:///file.csv"), ConfigError);
    }
}
