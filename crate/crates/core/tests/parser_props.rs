use proptest::prelude::*;

use walle_core::dialogue::{classify_target_miss, MissClass};
use walle_core::llm::{format_target_command, parse_target_command, TargetCommand};
use walle_core::scene::{Category, Color};

fn command() -> impl Strategy<Value = TargetCommand> {
    (
        "[a-z][a-z0-9'&-]{0,8}( [a-z0-9'&-]{1,8}){0,3}",
        proptest::sample::select(Color::ALL.to_vec()),
        proptest::sample::select(Category::ALL.to_vec()),
        "[A-Za-z0-9_-]{1,10}",
    )
        .prop_map(|(name, color, category, user)| TargetCommand::new(&name, color, category, &user).unwrap())
}

proptest! {
    #[test]
    fn format_then_parse_is_identity(cmd in command()) {
        let line = format_target_command(&cmd);
        prop_assert_eq!(parse_target_command(&line).unwrap(), cmd);
    }

    #[test]
    fn parser_tolerates_surrounding_prose(cmd in command(), pre in "[A-Za-z ,.!]{0,40}", post in "[A-Za-z ,.!]{0,40}") {
        let text = format!("{pre}\n{}\n{post}", format_target_command(&cmd));
        prop_assert_eq!(parse_target_command(&text).unwrap(), cmd);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_target_command(&text);
    }

    #[test]
    fn reparsed_command_classifies_ok(cmd in command()) {
        let again = parse_target_command(&format_target_command(&cmd)).unwrap();
        prop_assert_eq!(classify_target_miss(&cmd, Some(&again)).class, MissClass::Ok);
    }

    #[test]
    fn missing_command_is_no_command(cmd in command()) {
        prop_assert_eq!(classify_target_miss(&cmd, None).class, MissClass::NoCommand);
    }
}
