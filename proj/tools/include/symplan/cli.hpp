#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symplan::cli {

// args[0] is the subcommand (gen, train-clf, train-seq, eval, rollout,
// synth-imu, label-imu, grad-check, serve). Returns the process exit status;
// diagnostics go to `err`, results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace symplan::cli
