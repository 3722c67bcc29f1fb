#pragma once

#include <string>

#include "gshell/io.hpp"

namespace gshell {

// Shared execution layer: the CLI subcommands and the pipeline runner both
// call run_op with the same parameter objects, so a pipeline step behaves
// exactly like the equivalent command line.
struct OpContext {
    std::string dir;      // base for relative artifact paths ("" = cwd)
    uint64_t seed = 0;    // default stream seed; params may override
    int threads = 1;
    int log_level = 1;    // 0 quiet, 1 info, 2 debug
};

// Executes one operation ("gen", "extract", "fit", "metrics", "check",
// "winding", "gradcheck", "tensorize", "detensorize") and returns its summary.
// The summary's "artifacts" array lists every file the op wrote (paths as
// given, relative to ctx.dir).
json run_op(const std::string& op, json params, const OpContext& ctx);

// Runs the steps of a pipeline spec into out_dir and writes
// out_dir/manifest.json: one entry per step with the sha256 and byte size of
// each artifact. No timestamps or absolute paths, so identical spec + seed
// yields a byte-identical manifest. Halts on the first failing step.
json run_pipeline(const std::string& spec_path, const std::string& out_dir, int log_level = 1);

} // namespace gshell
