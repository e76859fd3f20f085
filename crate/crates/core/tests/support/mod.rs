#![allow(dead_code)]

pub mod ac5;
pub mod oracles;
pub mod props;
