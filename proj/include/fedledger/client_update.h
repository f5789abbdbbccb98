/*
 * Copyright 2026 The FedLedger Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDLEDGER_CLIENT_UPDATE_H_
#define FEDLEDGER_CLIENT_UPDATE_H_

#include <cstddef>
#include <cstdint>

#include "fedledger/params.h"

namespace fedledger {

// One client's contribution to one round.
struct ClientUpdate {
  std::uint64_t client_id = 0;
  std::uint64_t round = 0;
  ParameterSet params;
  std::uint64_t num_examples = 0;
  double train_loss = 0.0;
};

}  // namespace fedledger

#endif  // FEDLEDGER_CLIENT_UPDATE_H_
