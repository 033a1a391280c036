// Copyright 2026 The RawTFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <sstream>
#include <string>

#include "doctest.h"
#include "rawtfnet/config.hpp"
#include "rawtfnet/errors.hpp"

using namespace rawtfnet;

namespace {

std::string error_of(const std::string& text) {
  std::istringstream is(text);
  try {
    RunConfig c = parse_config(is);
    c.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config round trip") {
  RunConfig c = tiny_run_config();
  c.model.pool_positions = {};
  c.model.frontend_pool = {{1, 2}, {2, 3}};
  c.optim.lr = 0.1 + 0.2;  // not exactly representable in short decimal
  c.tdcf = TdcfCosts{0.25, 1.0, 3.5};
  c.data.train_protocol = "/some dir/train.txt";
  c.seed = 1234567890123ULL;
  std::ostringstream os;
  write_config(os, c);
  std::istringstream is(os.str());
  const RunConfig r = parse_config(is);
  for (const auto& key : config_keys()) CHECK_MESSAGE(config_get(r, key) == config_get(c, key), key);
  CHECK(r.optim.lr == c.optim.lr);
  CHECK(r.model.fingerprint() == c.model.fingerprint());

  std::ostringstream again;
  write_config(again, r);
  CHECK(again.str() == os.str());
}

TEST_CASE("config parsing") {
  std::istringstream is(
      "# comment\n"
      "model.tau = 32   # trailing\n"
      "\n"
      "optim.lr=0.001\n"
      "model.freq_branch = off\n"
      "seed = 9\n");
  const RunConfig c = parse_config(is);
  CHECK(c.model.tau == 32);
  CHECK(c.optim.lr == 0.001);
  CHECK(!c.model.freq_branch);
  CHECK(c.seed == 9u);
  CHECK(!RunConfig{}.seed);

  CHECK(error_of("model.tau = x\n").find("model.tau") != std::string::npos);
  CHECK(error_of("model.tau = x\n").find("line 1") != std::string::npos);
  CHECK(error_of("\nbogus.key = 1\n").find("bogus.key") != std::string::npos);
  CHECK(error_of("model.tau 16\n").find("line 1") != std::string::npos);
  CHECK(error_of("optim.lr = -1\n").find("optim.lr") != std::string::npos);
  CHECK(error_of("optim.lr = inf\n").find("optim.lr") != std::string::npos);
  CHECK(error_of("train.batch_size = 0\n").find("train.batch_size") != std::string::npos);
  CHECK(error_of("model.pool_positions = 3,12\n").find("pool_positions") != std::string::npos);
  CHECK(error_of("tdcf.costs = 0,0,1\n").find("tdcf.costs") != std::string::npos);
  CHECK(error_of("tdcf.costs = 1,2\n").find("tdcf.costs") != std::string::npos);
  CHECK(error_of("model.sinc_pool = 3\n").find("model.sinc_pool") != std::string::npos);
  CHECK(error_of("augment.n_bands = 0\n").find("augment.n_bands") != std::string::npos);
  CHECK(error_of("model.tau = 16\n").empty());

  RunConfig o;
  config_set(o, "model.pool_positions", "none");
  CHECK(o.model.pool_positions.empty());
  config_set(o, "tdcf.costs", " 1, 2, 3 ");
  REQUIRE(o.tdcf);
  CHECK(o.tdcf->c2 == 3.0);
  CHECK_THROWS_AS(load_config("/nonexistent/rawtfnet.cfg"), ConfigError);
}

TEST_CASE("tiny run config is valid") {
  const RunConfig c = tiny_run_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.model.tau == 16);
  CHECK(c.model.segment_len == 16000);
  CHECK(c.optim.lr == 1e-4);
  CHECK(c.optim.weight_decay == 1e-4);
  CHECK(c.batch_size == 32);
  CHECK(c.class_weights.spoof == 0.1);
  CHECK(c.class_weights.bonafide == 0.9);
}
