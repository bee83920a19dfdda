//! Line-oriented debug loop for authoring worlds.

use std::io::{self, BufRead, Write};

use rand::Rng;

use super::game::Game;

const HELP: &str = "commands are sent to the parser; :tokens shows the agent's view, :reset restarts, :quit exits";

/// Reads commands from `input` until EOF or `:quit`, printing feedback,
/// reward and the elimination signal after each one. Returns the final score.
pub fn repl<I: BufRead, O: Write, R: Rng + ?Sized>(
    game: &Game,
    input: I,
    mut out: O,
    rng: &mut R,
) -> io::Result<i64> {
    let mut state = game.initial_state();
    writeln!(out, "{HELP}")?;
    writeln!(out, "{}\n{}", game.room_text(&state), game.inventory_text(&state))?;
    for line in input.lines() {
        let line = line?;
        let cmd = line.trim();
        match cmd {
            "" => continue,
            ":quit" | ":q" => break,
            ":reset" => {
                state = game.initial_state();
                writeln!(out, "{}\n{}", game.room_text(&state), game.inventory_text(&state))?;
            }
            ":tokens" => writeln!(out, "{}", game.render_state_text(&state))?,
            ":help" => writeln!(out, "{HELP}")?,
            _ => {
                let o = game.execute(&state, cmd, rng);
                writeln!(out, "{}", o.observation)?;
                writeln!(
                    out,
                    "[reward {} elim {} score {} step {}{}]",
                    o.reward,
                    o.elim,
                    o.state.score,
                    o.state.steps,
                    if o.done { " done" } else { "" }
                )?;
                state = o.state;
                if o.done {
                    writeln!(out, "episode over; :reset to start again")?;
                }
            }
        }
    }
    Ok(state.score)
}
