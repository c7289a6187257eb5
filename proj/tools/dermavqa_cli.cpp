// Command-line front end for the dermatology CVQA pipeline. Talks to the
// engine strictly through the C API in dermavqa.h.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dermavqa.h"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string split = "valid";
    bool mock_backends = false;
    std::string seed;
    std::string workers;
    std::vector<std::string> set_options;  // key=value dotted-path overrides
};

void add_common(CLI::App* cmd, CommonOptions& options, bool with_split = true) {
    cmd->add_option("--config", options.config_path, "Pipeline config JSON")->required();
    if (with_split)
        cmd->add_option("--split", options.split, "Dataset split name (default: valid)");
    cmd->add_flag("--mock-backends", options.mock_backends,
                  "Use deterministic mock backends for every capability");
    cmd->add_option("--seed", options.seed, "Global seed override");
    cmd->add_option("--workers", options.workers, "Worker pool size override");
    cmd->add_option("--set", options.set_options,
                    "Extra config override as dotted.key=value (repeatable)");
}

using EnginePtr = std::unique_ptr<dvqa_engine_t, decltype(&dvqa_engine_destroy)>;

int fail(const dvqa_engine_t* engine, dvqa_status_t status) {
    std::fprintf(stderr, "error: %s\n", dvqa_engine_last_error(engine));
    return static_cast<int>(status);
}

int make_engine(const CommonOptions& options, EnginePtr& engine) {
    dvqa_engine_t* raw = nullptr;
    dvqa_status_t status = dvqa_engine_create(options.config_path.c_str(), &raw);
    engine = EnginePtr(raw, &dvqa_engine_destroy);
    if (status != DVQA_STATUS_OK) return fail(raw, status);

    auto set = [&](const char* key, const std::string& value) -> int {
        dvqa_status_t s = dvqa_engine_set_option(engine.get(), key, value.c_str());
        if (s != DVQA_STATUS_OK) return fail(engine.get(), s);
        return 0;
    };
    if (options.mock_backends)
        if (int rc = set("mock_backends", "true")) return rc;
    if (!options.seed.empty())
        if (int rc = set("seed", options.seed)) return rc;
    if (!options.workers.empty())
        if (int rc = set("workers", options.workers)) return rc;
    for (const auto& kv : options.set_options) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error: --set expects dotted.key=value, got \"%s\"\n",
                         kv.c_str());
            return static_cast<int>(DVQA_STATUS_CONFIG_ERROR);
        }
        dvqa_status_t s = dvqa_engine_set_option(engine.get(), kv.substr(0, eq).c_str(),
                                                 kv.substr(eq + 1).c_str());
        if (s != DVQA_STATUS_OK) return fail(engine.get(), s);
    }
    return 0;
}

int finish(const EnginePtr& engine, dvqa_status_t status) {
    if (status != DVQA_STATUS_OK) return fail(engine.get(), status);
    std::printf("%s\n", dvqa_engine_last_manifest(engine.get()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dermavqa - agentic retrieval-augmented pipeline for closed-form "
                 "dermatology VQA"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dvqa_version()));

    CommonOptions preprocess_opts, build_kb_opts, run_opts, aggregate_opts, evaluate_opts,
        agreement_opts;
    std::vector<std::string> agreement_preds;
    bool agreement_gold = false;

    auto* preprocess = app.add_subcommand(
        "preprocess", "Parse challenge inputs and emit batched JSONL samples");
    add_common(preprocess, preprocess_opts);

    auto* build_kb =
        app.add_subcommand("build-kb", "Embed the knowledge base and persist the index");
    add_common(build_kb, build_kb_opts, /*with_split=*/false);

    auto* run = app.add_subcommand(
        "run", "Run retrieval, agents and the decision loop over preprocessed batches");
    add_common(run, run_opts);

    auto* aggregate = app.add_subcommand(
        "aggregate", "Consolidate per-image predictions into submission files");
    add_common(aggregate, aggregate_opts);

    auto* evaluate =
        app.add_subcommand("evaluate", "Score the submission against gold annotations");
    add_common(evaluate, evaluate_opts);

    auto* agreement =
        app.add_subcommand("agreement", "Pairwise agreement matrix across prediction sets");
    add_common(agreement, agreement_opts);
    agreement->add_option("--pred", agreement_preds,
                          "name=submission.json (repeatable)")->required();
    agreement->add_flag("--include-gold", agreement_gold,
                        "Include the split's annotations as a pseudo-model");

    CLI11_PARSE(app, argc, argv);

    EnginePtr engine(nullptr, &dvqa_engine_destroy);
    if (preprocess->parsed()) {
        if (int rc = make_engine(preprocess_opts, engine)) return rc;
        return finish(engine, dvqa_preprocess(engine.get(), preprocess_opts.split.c_str()));
    }
    if (build_kb->parsed()) {
        if (int rc = make_engine(build_kb_opts, engine)) return rc;
        return finish(engine, dvqa_build_kb(engine.get()));
    }
    if (run->parsed()) {
        if (int rc = make_engine(run_opts, engine)) return rc;
        return finish(engine, dvqa_run(engine.get(), run_opts.split.c_str()));
    }
    if (aggregate->parsed()) {
        if (int rc = make_engine(aggregate_opts, engine)) return rc;
        return finish(engine, dvqa_aggregate(engine.get(), aggregate_opts.split.c_str()));
    }
    if (evaluate->parsed()) {
        if (int rc = make_engine(evaluate_opts, engine)) return rc;
        return finish(engine, dvqa_evaluate(engine.get(), evaluate_opts.split.c_str()));
    }
    if (agreement->parsed()) {
        if (int rc = make_engine(agreement_opts, engine)) return rc;
        std::vector<std::string> names, paths;
        for (const auto& pred : agreement_preds) {
            auto eq = pred.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::fprintf(stderr, "error: --pred expects name=path, got \"%s\"\n",
                             pred.c_str());
                return static_cast<int>(DVQA_STATUS_CONFIG_ERROR);
            }
            names.push_back(pred.substr(0, eq));
            paths.push_back(pred.substr(eq + 1));
        }
        std::vector<const char*> name_ptrs, path_ptrs;
        for (const auto& name : names) name_ptrs.push_back(name.c_str());
        for (const auto& path : paths) path_ptrs.push_back(path.c_str());
        return finish(engine,
                      dvqa_agreement(engine.get(), name_ptrs.data(), path_ptrs.data(),
                                     name_ptrs.size(), agreement_gold ? 1 : 0,
                                     agreement_opts.split.c_str()));
    }
    return 0;
}
