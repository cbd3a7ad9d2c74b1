fn main() {
    std::process::exit(belief_dynamics::cli::main());
}
