// SPDX-License-Identifier: Apache-2.0
//
// dead-annot-service: the job API over HTTP on a local port.

#include <CLI11.hpp>
#include <httplib.h>

#include <iostream>

#include "deadannot/http_service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Serve annotation analysis jobs over HTTP"};
  std::string host = "127.0.0.1";
  int port = 8470;
  deadannot::ServiceOptions options;
  app.add_option("--host", host, "Address to bind")->capture_default_str();
  app.add_option("--port", port, "Port to listen on")->check(CLI::Range(1, 65535))->capture_default_str();
  app.add_option("--idle-ms", options.idle_threshold_ms,
                 "Client idle time before dirty methods are re-analyzed")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  deadannot::JobService service(options);
  httplib::Server server;
  deadannot::install_routes(server, service);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}
