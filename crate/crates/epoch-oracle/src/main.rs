fn main() {
    std::process::exit(epoch_oracle::cli::run());
}
