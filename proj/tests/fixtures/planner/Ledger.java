package com.ex.plan;

public class Ledger {
    private int balance;
    private int ops;

    public int deposit(int amount) {
        if (amount <= 0) {
            throw new IllegalArgumentException("amount");
        }
        balance += amount;
        ops++;
        return balance;
    }

    public int withdraw(int amount) {
        if (amount <= 0) {
            throw new IllegalArgumentException("amount");
        } else if (amount > balance) {
            ops++;
            return -1;
        }
        balance -= amount;
        ops++;
        return balance;
    }

    public String grade() {
        switch (balance / 100) {
            case 0:
                return "low";
            case 1:
                return "mid";
            default:
                return "high";
        }
    }

    public int drain(int steps) {
        int taken = 0;
        while (steps > 0 && balance > 0) {
            balance--;
            taken++;
            steps--;
        }
        return taken;
    }

    public void reset() {
        balance = 0;
        ops = 0;
    }

    public int ops() {
        return ops;
    }
}
