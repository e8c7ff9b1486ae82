// Writes the planted-shortcut demo corpus, embeddings, pair lists, lexicon
// and trust labels into a directory.

#include <iostream>

#include <CLI11.hpp>

#include "toki/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate the planted-shortcut demo fixture"};
    std::string dir = "data";
    toki::synthetic::PlantedConfig cfg;
    app.add_option("dir", dir, "Output directory")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Generator seed")->capture_default_str();
    app.add_option("--train-per-class", cfg.train_per_class)->capture_default_str();
    app.add_option("--stores", cfg.n_stores, "Number of embedding stores")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        const auto fx = toki::synthetic::make_planted_fixture(cfg);
        toki::synthetic::write_fixture(dir, fx);
        std::cout << "wrote " << fx.train.size() << " training and " << fx.test.size() << " test documents, "
                  << fx.stores.size() << " stores, " << fx.related_pairs.size() << " related and "
                  << fx.unrelated_pairs.size() << " unrelated pairs to " << dir << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
