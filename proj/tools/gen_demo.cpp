#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tablekv/engine.hpp"
#include "tablekv/errors.hpp"
#include "tablekv/rng.hpp"
#include "tablekv/schema.hpp"
#include "tablekv/serialize.hpp"

using namespace tablekv;
namespace fs = std::filesystem;

namespace {

TableSchema table(int id, std::string name, std::vector<ColumnDef> cols,
                  std::vector<ForeignKey> fks = {}) {
    TableSchema t;
    t.table_id = id;
    t.name = std::move(name);
    t.columns = std::move(cols);
    t.foreign_keys = std::move(fks);
    return t;
}

// Twelve tables: districts -> schools -> classes -> enrollments form a
// four-table PFK chain; the rest are standalone.
std::vector<TableSchema> demo_schema() {
    std::vector<TableSchema> corpus;
    corpus.push_back(table(0, "districts",
                           {{"id", "district identifier", true},
                            {"name", "", false},
                            {"county", "county the district serves", false}}));
    corpus.push_back(table(1, "schools",
                           {{"id", "", true},
                            {"district_id", "", false},
                            {"name", "school name", false},
                            {"charter", "1 if charter funded", false}},
                           {{"district_id", 0, "id"}}));
    corpus.push_back(table(2, "classes",
                           {{"id", "", true},
                            {"school_id", "", false},
                            {"subject", "course subject code", false},
                            {"room", "", false}},
                           {{"school_id", 1, "id"}}));
    corpus.push_back(table(3, "enrollments",
                           {{"id", "", true},
                            {"class_id", "", false},
                            {"student_name", "", false},
                            {"grade", "final letter grade", false}},
                           {{"class_id", 2, "id"}}));
    corpus.push_back(table(4, "vendors",
                           {{"id", "", true},
                            {"name", "legal entity name", false},
                            {"city", "", false}}));
    corpus.push_back(table(5, "invoices",
                           {{"id", "", true},
                            {"vendor_name", "", false},
                            {"total", "amount in dollars", false},
                            {"issued", "issue date", false}}));
    corpus.push_back(table(6, "audits",
                           {{"id", "", true},
                            {"subject", "", false},
                            {"status", "open, closed, or escalated", false}}));
    corpus.push_back(table(7, "payments",
                           {{"id", "", true},
                            {"invoice_ref", "free-form invoice reference", false},
                            {"amount", "", false},
                            {"method", "", false}}));
    corpus.push_back(table(8, "budgets",
                           {{"id", "", true},
                            {"year", "", false},
                            {"allocation", "planned spend in dollars", false}}));
    corpus.push_back(table(9, "grants",
                           {{"id", "", true},
                            {"sponsor", "", false},
                            {"awarded", "", false}}));
    corpus.push_back(table(10, "assets",
                           {{"id", "", true},
                            {"description", "", false},
                            {"purchased", "purchase date", false}}));
    corpus.push_back(table(11, "permits",
                           {{"id", "", true},
                            {"holder", "", false},
                            {"expires", "", false}}));
    return corpus;
}

const std::vector<std::string> kChainQuestions = {
    "question: how many students enrolled in charter schools\n",
    "question: which county has the most classes per school\n",
    "question: list schools whose enrollments dropped\n",
    "question: average grade by district\n",
};

const std::vector<std::string> kLedgerQuestions = {
    "question: total invoice amount per vendor\n",
    "question: which payments lack an audit\n",
    "question: vendors with escalated audits\n",
    "question: largest payment method by volume\n",
};

const std::vector<std::string> kColdQuestions = {
    "question: budget allocation for the current year\n",
    "question: sponsors with more than one grant\n",
    "question: assets purchased this quarter\n",
    "question: permits expiring soon\n",
};

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write: " + path.string());
    out << body;
    if (!out) throw Error(Errc::io_error, "short write: " + path.string());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the demo schema, workload, and config"};

    std::string out_dir = "data";
    int n_queries = 200;
    uint64_t seed = 1;
    bool shuffle_tables = true;
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--queries", n_queries, "workload size")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "randomization seed");
    app.add_flag("--shuffle-tables,!--no-shuffle-tables", shuffle_tables,
                 "randomize the table order inside each prompt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto corpus = demo_schema();
        std::vector<std::string> rendered;
        rendered.reserve(corpus.size());
        for (const auto& t : corpus) rendered.push_back(serialize_table(t));

        SeededRng rng(seed);
        auto prompt = [&](std::vector<int> tables, const std::string& question) {
            if (shuffle_tables) {
                for (size_t i = tables.size(); i > 1; --i) {
                    const size_t j = rng.next_below(i);
                    std::swap(tables[i - 1], tables[j]);
                }
            }
            std::string text;
            for (int id : tables) text += rendered[id];
            return text + question;
        };

        // Two hot four-table clusters served alternately; every 50th query
        // touches one of the cold standalone tables instead.
        std::vector<WorkloadEntry> workload;
        workload.reserve(n_queries);
        for (int i = 0; i < n_queries; ++i) {
            const std::string id = "q" + std::to_string(i);
            if (i % 50 == 49) {
                const int cold = 8 + (i / 50) % 4;
                workload.push_back({id, prompt({cold}, kColdQuestions[cold - 8])});
            } else if (i % 2 == 0) {
                workload.push_back(
                    {id, prompt({0, 1, 2, 3}, kChainQuestions[(i / 2) % kChainQuestions.size()])});
            } else {
                workload.push_back(
                    {id, prompt({4, 5, 6, 7}, kLedgerQuestions[(i / 2) % kLedgerQuestions.size()])});
            }
        }

        const std::string config = R"({
  "format_version": 1,
  "capacity_C": 6,
  "policy": "lru",
  "b_c": 1,
  "b_m": 1,
  "compute_per_token": 0.01,
  "load_per_token": 1.0,
  "switch_overhead": 5.0,
  "rerank_on": true,
  "pipeline_on": true,
  "seed": 1
}
)";

        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "demo_schema.json", dump_schema_corpus(corpus));
        write_file(fs::path(out_dir) / "demo_workload.jsonl", dump_workload(workload));
        write_file(fs::path(out_dir) / "demo_config.json", config);
        std::cout << "wrote " << corpus.size() << " tables and " << workload.size()
                  << " queries to " << out_dir << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
