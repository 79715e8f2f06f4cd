// SPDX-License-Identifier: Apache-2.0
//
// JSON over HTTP for JobService.
//
//   POST   /jobs                 {source, oracle, file_name?}     201 job
//   GET    /jobs                                                  200 {jobs}
//   GET    /jobs/{id}                                             200 job
//   DELETE /jobs/{id}                                             204
//   POST   /jobs/{id}/analyze    {methods?}                       202 | 409
//   POST   /jobs/{id}/cancel                                      200 {mode}
//   POST   /jobs/{id}/apply      {id | method | all, expect_rev?} 200 {source, source_rev}
//   PATCH  /jobs/{id}/source     {source, expect_rev?}            200 {source_rev, dirty}
//   POST   /jobs/{id}/idle       {idle_ms}                        200 {started}
//
// `oracle` is {"deps": "<sidecar text>"} or {"external": {<config>}}.
// Errors are {"code", "message", "location"?: {"line", "column"}}.

#pragma once

#include <json.hpp>

#include "deadannot/service.hpp"

namespace httplib {
class Server;
}

namespace deadannot {

nlohmann::json to_json(const JobSnapshot& snapshot);
OracleSpec oracle_spec_from_json(const nlohmann::json& oracle);

void install_routes(httplib::Server& server, JobService& service);

}  // namespace deadannot
