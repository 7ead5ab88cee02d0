use std::process::ExitCode;

fn main() -> ExitCode {
    match recipe_forge_cli::run(std::env::args_os()) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) if e.code == recipe_forge_cli::EXIT_OK => {
            print!("{}", e.message);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message.trim_end());
            ExitCode::from(e.code as u8)
        }
    }
}
