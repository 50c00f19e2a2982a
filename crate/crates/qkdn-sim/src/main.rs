fn main() {
    // Die quietly on closed pipes (`qkdn-orr compare | head`) instead of
    // panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(qkdn_sim::cli::run());
}
